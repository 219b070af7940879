"""Laser-control calibration: normalized optimizer power -> driver setting.

The optimizer emits normalized laser powers in [0, 1] with no physical
meaning. A small feed-forward network (1 input, four hidden layers, 1
output) learns the inverse of the measured driver->intensity response so a
requested power can be turned into a driver setting. Measured samples are
assumed linear in intensity already (no gamma handling on ingestion).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

HIDDEN_LAYERS = 4
MODEL_FORMAT = "holobright-calibration 1"


@dataclass(frozen=True)
class ResponseSample:
    """One measured point of the laser response curve."""

    driver_setting: float
    normalized_intensity: float

    def __post_init__(self):
        if not 0.0 <= self.normalized_intensity <= 1.0:
            raise ValueError(
                f"normalized_intensity must be in [0, 1], got {self.normalized_intensity}"
            )


@dataclass
class CalibrationModel:
    """Trained intensity -> driver mapping with the observed driver range."""

    weights: list = field(repr=False)
    biases: list = field(repr=False)
    driver_min: float = 0.0
    driver_max: float = 1.0
    final_loss: float = float("nan")

    def evaluate(self, x) -> np.ndarray:
        """Raw network output (driver units) for inputs in [0, 1]."""
        a = np.atleast_1d(np.asarray(x, dtype=np.float64))[:, None]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
        a = a @ self.weights[-1] + self.biases[-1]
        span = self.driver_max - self.driver_min
        return (a[:, 0] * span) + self.driver_min


def _init_net(width: int, rng: np.random.Generator):
    sizes = [1] + [width] * HIDDEN_LAYERS + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def fit(
    samples,
    epochs: int = 4000,
    lr: float = 0.01,
    width: int = 16,
    seed: int = 0,
) -> CalibrationModel:
    """Train the mapping from normalized intensity to driver setting.

    Full-batch Adam on squared error; deterministic for a fixed seed.
    """
    samples = list(samples)
    if len(samples) < 8:
        raise ValueError(f"need at least 8 samples, got {len(samples)}")
    x = np.array([s.normalized_intensity for s in samples], dtype=np.float64)
    y = np.array([s.driver_setting for s in samples], dtype=np.float64)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ValueError("degenerate response data: samples form a single point")

    y_min, y_max = float(y.min()), float(y.max())
    y_n = (y - y_min) / (y_max - y_min)

    from .optimize import Adam

    rng = np.random.default_rng(seed)
    weights, biases = _init_net(width, rng)
    opts = [Adam(w.shape, lr) for w in weights] + [Adam(b.shape, lr) for b in biases]
    n = len(weights)
    xin = x[:, None]
    loss = float("nan")
    for _ in range(epochs):
        # forward, keeping activations for backprop
        acts = [xin]
        pre = []
        a = xin
        for i in range(n - 1):
            z = a @ weights[i] + biases[i]
            a = np.tanh(z)
            pre.append(z)
            acts.append(a)
        out = (a @ weights[-1] + biases[-1])[:, 0]
        err = out - y_n
        loss = float(np.mean(err**2))
        g = (2.0 / len(err)) * err[:, None]
        grads_w = [None] * n
        grads_b = [None] * n
        grads_w[-1] = acts[-1].T @ g
        grads_b[-1] = g.sum(axis=0)
        d = g @ weights[-1].T
        for i in range(n - 2, -1, -1):
            d = d * (1.0 - acts[i + 1] ** 2)
            grads_w[i] = acts[i].T @ d
            grads_b[i] = d.sum(axis=0)
            if i:
                d = d @ weights[i].T
        for i in range(n):
            weights[i] = opts[i].step(weights[i], grads_w[i])
            biases[i] = opts[n + i].step(biases[i], grads_b[i])

    return CalibrationModel(
        weights=weights,
        biases=biases,
        driver_min=y_min,
        driver_max=y_max,
        final_loss=loss,
    )


def map_power(model: CalibrationModel, normalized_power: float) -> float:
    """Driver setting for a normalized power (the squared schedule amplitude).

    Output is clamped to the driver range seen during fitting.
    """
    p = float(normalized_power)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"normalized power must be in [0, 1], got {p}")
    out = float(model.evaluate(p)[0])
    return float(np.clip(out, model.driver_min, model.driver_max))


_CURVES = {
    "linear": lambda x: x,
    "saturating": lambda x: (1.0 - np.exp(-3.0 * x)) / (1.0 - np.exp(-3.0)),
    "thresholded": lambda x: (
        1.0 / (1.0 + np.exp(-10.0 * (x - 0.5))) - 1.0 / (1.0 + np.exp(5.0))
    )
    / (1.0 / (1.0 + np.exp(-5.0)) - 1.0 / (1.0 + np.exp(5.0))),
}


def synth_response(curve_id: str, n: int) -> list[ResponseSample]:
    """Synthetic monotone response curves standing in for bench measurements.

    Driver settings are n points evenly spaced over [0, 1]; intensities
    follow the named curve (linear, saturating, or thresholded).
    """
    if curve_id not in _CURVES:
        raise ValueError(f"unknown curve {curve_id!r}; choose from {sorted(_CURVES)}")
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    drivers = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.0])
    curve = _CURVES[curve_id]
    return [
        ResponseSample(float(d), float(np.clip(curve(d), 0.0, 1.0))) for d in drivers
    ]


def read_samples_csv(path) -> list[ResponseSample]:
    """Read samples from a CSV with header driver_setting,normalized_intensity."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != [
            "driver_setting",
            "normalized_intensity",
        ]:
            raise ValueError(
                f"{path}: expected header 'driver_setting,normalized_intensity'"
            )
        return [ResponseSample(float(row[0]), float(row[1])) for row in reader if row]


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["driver_setting", "normalized_intensity"])
        for s in samples:
            writer.writerow([f"{s.driver_setting:.10g}", f"{s.normalized_intensity:.10g}"])


def save_model(model: CalibrationModel, path) -> None:
    """Persist a model as plain text with a shape header."""
    sizes = [w.shape[0] for w in model.weights] + [model.weights[-1].shape[1]]
    lines = [
        MODEL_FORMAT,
        "activation tanh",
        "layers " + " ".join(str(s) for s in sizes),
        f"driver_range {model.driver_min:.17g} {model.driver_max:.17g}",
        f"final_loss {model.final_loss:.17g}",
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"W{i} " + " ".join(f"{v:.17g}" for v in w.ravel()))
        lines.append(f"b{i} " + " ".join(f"{v:.17g}" for v in b.ravel()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> CalibrationModel:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MODEL_FORMAT:
        raise ValueError(f"{path}: not a calibration model file")
    meta = {}
    rows = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key[0] in "Wb":
            rows[key] = np.array([float(v) for v in rest.split()])
        else:
            meta[key] = rest
    sizes = [int(v) for v in meta["layers"].split()]
    dmin, dmax = (float(v) for v in meta["driver_range"].split())
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        weights.append(rows[f"W{i}"].reshape(fan_in, fan_out))
        biases.append(rows[f"b{i}"])
    return CalibrationModel(
        weights=weights,
        biases=biases,
        driver_min=dmin,
        driver_max=dmax,
        final_loss=float(meta.get("final_loss", "nan")),
    )
