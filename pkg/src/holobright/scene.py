"""Target ingestion, phase/reconstruction export, and the run configuration.

Targets arrive as 8- or 16-bit PNGs. 8-bit images default to sRGB-style
gamma 2.2 decoding (photographs are gamma-encoded; the optimizer needs
linear intensity); 16-bit inputs default to linear. Phases leave as
grayscale PNGs mapping [-pi, pi) onto the quantizer levels, and
reconstructions leave tone-mapped from linear [0, s] back to 8-bit.

A run is described by one structured config document (YAML or JSON) with
three sections: display (geometry and wavelengths), scene (target planes
and brightness scale), optimizer (loop hyperparameters, loss weights,
ablation switches). apply_overrides() sets dotted key paths from the
command line, one-for-one with the schema.
"""

from __future__ import annotations

import hashlib
import json
import copy
from dataclasses import dataclass, field

import numpy as np
import yaml
from PIL import Image
from scipy import ndimage

from .encoding import dequantize_phase, quantize_phase
from .forward import DisplayConfig
from .losses import LossWeights
from .optimize import OptimizerConfig

GAMMA = 2.2


@dataclass
class SceneSpec:
    """Where the targets live and how to interpret them."""

    planes: list
    distances_m: list
    gamma_decode: bool | None = None  # None: decide by bit depth
    resize: str = "scale"  # pad | crop | scale
    scale: float = 1.0
    dynamic: dict | None = None  # {"s_init":, "s_max":, "epsilon":}

    def __post_init__(self):
        if len(self.planes) != len(self.distances_m):
            raise ValueError(
                f"{len(self.planes)} plane images but {len(self.distances_m)} distances"
            )
        if not self.planes:
            raise ValueError("at least one target plane is required")
        if self.resize not in ("pad", "crop", "scale"):
            raise ValueError(f"unknown resize policy {self.resize!r}")
        if not all(np.isfinite(self.distances_m)):
            raise ValueError("plane distances must be finite")


@dataclass
class TargetScene:
    """Linear-intensity targets, one per focal plane, plus the brightness scale."""

    images: np.ndarray  # (planes, 3, H, W) in [0, 1]
    distances: tuple
    scale: float = 1.0


# ---------------------------------------------------------------------------
# PNG input


def _decode_png(path):
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA"):
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            depth = 8
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)[..., None].repeat(3, axis=-1) / 255.0
            depth = 8
        elif im.mode in ("I;16", "I"):
            raw = np.asarray(im, dtype=np.float64)
            if im.mode == "I" and raw.max() > 65535:
                raise ValueError(f"{path}: unsupported bit depth")
            arr = (raw / 65535.0)[..., None].repeat(3, axis=-1)
            depth = 16
        else:
            raise ValueError(f"{path}: unsupported PNG mode {im.mode!r}")
    return arr.transpose(2, 0, 1), depth  # (3, H, W)


def _resize(img: np.ndarray, out_shape, policy: str) -> np.ndarray:
    c, h, w = img.shape
    oh, ow = out_shape
    if (h, w) == (oh, ow):
        return img
    if policy == "scale":
        return np.stack(
            [ndimage.zoom(ch, (oh / h, ow / w), order=1, grid_mode=True, mode="nearest")
             for ch in img]
        )
    if policy == "crop":
        if h < oh or w < ow:
            raise ValueError(
                f"cannot center-crop {h}x{w} image to larger {oh}x{ow} display"
            )
        y0, x0 = (h - oh) // 2, (w - ow) // 2
        return img[:, y0 : y0 + oh, x0 : x0 + ow]
    # pad: center-place on a black canvas, trimming any excess
    canvas = np.zeros((c, oh, ow))
    ys, xs = min(h, oh), min(w, ow)
    iy, ix = (h - ys) // 2, (w - xs) // 2
    oy, ox = (oh - ys) // 2, (ow - xs) // 2
    canvas[:, oy : oy + ys, ox : ox + xs] = img[:, iy : iy + ys, ix : ix + xs]
    return canvas


def load_target(spec: SceneSpec, display_shape) -> TargetScene:
    """Decode, linearize, and resize the scene's target planes."""
    planes = []
    for path in spec.planes:
        img, depth = _decode_png(path)
        decode = spec.gamma_decode if spec.gamma_decode is not None else depth == 8
        if decode:
            img = img**GAMMA
        planes.append(_resize(np.clip(img, 0.0, 1.0), display_shape, spec.resize))
    return TargetScene(
        images=np.stack(planes),
        distances=tuple(spec.distances_m),
        scale=spec.scale,
    )


# ---------------------------------------------------------------------------
# exports


def save_phase(phase: np.ndarray, path, bits: int = 8) -> None:
    """Write one phase map as a grayscale PNG of quantizer levels."""
    phase = np.asarray(phase, dtype=np.float64)
    if not np.all(np.isfinite(phase)):
        raise ValueError("phase map contains non-finite values")
    levels = quantize_phase(phase, bits)
    if bits <= 8:
        Image.fromarray(levels.astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(levels.astype(np.uint16), mode="I;16").save(path)


def load_phase(path, bits: int = 8) -> np.ndarray:
    """Read a phase PNG back to radians (quantization-limited round trip)."""
    with Image.open(path) as im:
        levels = np.asarray(im, dtype=np.float64)
    return dequantize_phase(levels, bits)


def _tone_map(image: np.ndarray, scale: float, gamma_encode: bool) -> np.ndarray:
    x = np.clip(np.asarray(image, dtype=np.float64) / scale, 0.0, 1.0)
    if gamma_encode:
        x = x ** (1.0 / GAMMA)
    return np.floor(255.0 * x + 0.5).astype(np.uint8)


def save_reconstruction(images, scale, path_prefix, gamma_encode: bool = True):
    """Write per-plane reconstruction PNGs plus a side-by-side strip.

    images: (planes, 3, H, W) or (3, H, W) linear intensities in [0, scale].
    Returns the list of file paths written.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    written = []
    mapped = []
    for k, img in enumerate(images):
        arr = _tone_map(img, scale, gamma_encode).transpose(1, 2, 0)
        mapped.append(arr)
        path = f"{path_prefix}_plane{k}.png"
        Image.fromarray(arr, mode="RGB").save(path)
        written.append(path)
    strip = np.concatenate(mapped, axis=1)
    strip_path = f"{path_prefix}_strip.png"
    Image.fromarray(strip, mode="RGB").save(strip_path)
    written.append(strip_path)
    return written


# ---------------------------------------------------------------------------
# configuration document


class ConfigError(ValueError):
    """Config validation failure with the offending dotted key path."""


def default_config() -> dict:
    return {
        "display": {
            "wavelengths_nm": [639.0, 515.0, 473.0],
            "anchor_nm": 515.0,
            "pitch_um": 8.0,
            "width": 1920,
            "height": 1080,
            "aperture_fraction": 0.5,
            "phase_scale_inverse": False,
        },
        "scene": {
            "planes": [],
            "distances_m": [0.0],
            "gamma_decode": None,
            "resize": "scale",
            "scale": 1.0,
            "dynamic": None,
        },
        "optimizer": {
            "lr": 0.015,
            "steps": 1000,
            "T": 3,
            "seed": 0,
            "weights": {"w1": 3.0, "w2": 0.05, "w3": 0.1, "w4": 0.1},
            "epsilon": 0.01,
            "laser_floor": 0.0,
            "ablation": {
                "no_phase_constraint": False,
                "no_tv": False,
                "no_laser": False,
            },
        },
    }


_SCHEMA_LEAVES = {
    "display.wavelengths_nm": list,
    "display.anchor_nm": (int, float),
    "display.pitch_um": (int, float),
    "display.width": int,
    "display.height": int,
    "display.aperture_fraction": (int, float, type(None)),
    "display.phase_scale_inverse": bool,
    "scene.planes": list,
    "scene.distances_m": list,
    "scene.gamma_decode": (bool, type(None)),
    "scene.resize": str,
    "scene.scale": (int, float),
    "scene.dynamic": (dict, type(None)),
    "scene.dynamic.s_init": (int, float),
    "scene.dynamic.s_max": (int, float),
    "scene.dynamic.epsilon": (int, float),
    "optimizer.lr": (int, float),
    "optimizer.steps": int,
    "optimizer.T": int,
    "optimizer.seed": int,
    "optimizer.weights": dict,
    "optimizer.weights.w1": (int, float),
    "optimizer.weights.w2": (int, float),
    "optimizer.weights.w3": (int, float),
    "optimizer.weights.w4": (int, float),
    "optimizer.epsilon": (int, float),
    "optimizer.laser_floor": (int, float),
    "optimizer.ablation": dict,
    "optimizer.ablation.no_phase_constraint": bool,
    "optimizer.ablation.no_tv": bool,
    "optimizer.ablation.no_laser": bool,
}


def load_config(path) -> dict:
    """Read and validate a YAML or JSON config, merged over the defaults."""
    text = open(path).read()
    name = str(path)
    try:
        if name.endswith(".json"):
            user = json.loads(text)
        else:
            user = yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{name}: parse error: {exc}") from exc
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError(f"{name}: config root must be a mapping")
    cfg = _merge(default_config(), user, "")
    validate_config(cfg)
    return cfg


def _merge(base: dict, user: dict, prefix: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {dotted!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, dotted + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(cfg: dict) -> None:
    def leaf(dotted):
        node = cfg
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    for dotted, types in _SCHEMA_LEAVES.items():
        value = leaf(dotted)
        if value is None and "dynamic." in dotted:
            continue  # dynamic block is optional
        if value is None and dotted in ("display.aperture_fraction", "scene.gamma_decode",
                                        "scene.dynamic"):
            continue
        if value is None:
            raise ConfigError(f"missing config key {dotted!r}")
        if isinstance(types, tuple):
            ok = isinstance(value, types) and not (
                isinstance(value, bool) and bool not in types
            )
        else:
            ok = isinstance(value, types) and not (
                isinstance(value, bool) and types is not bool
            )
        if not ok:
            raise ConfigError(
                f"config key {dotted!r} has invalid type {type(value).__name__}"
            )
    wl = cfg["display"]["wavelengths_nm"]
    if len(wl) != 3 or any(not isinstance(w, (int, float)) or w <= 0 for w in wl):
        raise ConfigError("display.wavelengths_nm must be three positive numbers")
    if not any(abs(cfg["display"]["anchor_nm"] - w) < 1e-9 for w in wl):
        raise ConfigError("display.anchor_nm must equal one of display.wavelengths_nm")
    for key in ("width", "height"):
        v = cfg["display"][key]
        if v < 4 or v % 2:
            raise ConfigError(f"display.{key} must be even and >= 4")
    if cfg["optimizer"]["T"] not in (1, 2, 3):
        raise ConfigError("optimizer.T must be 1, 2, or 3")
    if cfg["optimizer"]["steps"] < 1:
        raise ConfigError("optimizer.steps must be >= 1")
    if cfg["scene"]["resize"] not in ("pad", "crop", "scale"):
        raise ConfigError("scene.resize must be pad, crop, or scale")
    dyn = cfg["scene"]["dynamic"]
    if dyn is not None:
        for key in dyn:
            if key not in ("s_init", "s_max", "epsilon"):
                raise ConfigError(f"unknown config key 'scene.dynamic.{key}'")


def apply_overrides(cfg: dict, overrides) -> dict:
    """Set dotted key paths (e.g. optimizer.steps=200); values parse as YAML."""
    out = copy.deepcopy(cfg)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {key}: bad value {raw!r}: {exc}") from exc
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                if part == "dynamic" and node.get(part) is None:
                    node[part] = {}
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            node = node[part]
        last = parts[-1]
        known = key in _SCHEMA_LEAVES or any(
            k.startswith(key + ".") for k in _SCHEMA_LEAVES
        )
        if not known:
            raise ConfigError(f"unknown config key {key!r}")
        node[last] = value
    validate_config(out)
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


# ---------------------------------------------------------------------------
# config -> runtime objects


def to_display_config(cfg: dict) -> DisplayConfig:
    d = cfg["display"]
    wavelengths = tuple(w * 1e-9 for w in d["wavelengths_nm"])
    anchor_nm = d["anchor_nm"]
    anchor_index = int(
        np.argmin([abs(anchor_nm - w) for w in d["wavelengths_nm"]])
    )
    return DisplayConfig(
        wavelengths=wavelengths,
        anchor_index=anchor_index,
        pitch=d["pitch_um"] * 1e-6,
        shape=(d["height"], d["width"]),
        distances=tuple(cfg["scene"]["distances_m"]),
        subframes=cfg["optimizer"]["T"],
        aperture_fraction=d["aperture_fraction"],
        phase_scale_inverse=d["phase_scale_inverse"],
    )


def to_optimizer_config(cfg: dict) -> OptimizerConfig:
    o = cfg["optimizer"]
    dyn = cfg["scene"]["dynamic"]
    weights = LossWeights(
        w1=o["weights"]["w1"],
        w2=o["weights"]["w2"],
        w3=o["weights"]["w3"],
        w4=o["weights"]["w4"],
        epsilon_image=(dyn or {}).get("epsilon", o["epsilon"]),
        laser_floor=o["laser_floor"],
    )
    return OptimizerConfig(
        learning_rate=o["lr"],
        steps=o["steps"],
        subframes=o["T"],
        scale_mode="dynamic" if dyn is not None else "fixed",
        scale=cfg["scene"]["scale"],
        s_init=(dyn or {}).get("s_init", 1.0),
        s_max=(dyn or {}).get("s_max", 3.0),
        seed=o["seed"],
        no_phase_constraint=o["ablation"]["no_phase_constraint"],
        no_tv_loss=o["ablation"]["no_tv"],
        no_laser_loss=o["ablation"]["no_laser"],
        weights=weights,
    )


def to_scene_spec(cfg: dict) -> SceneSpec:
    s = cfg["scene"]
    return SceneSpec(
        planes=list(s["planes"]),
        distances_m=list(s["distances_m"]),
        gamma_decode=s["gamma_decode"],
        resize=s["resize"],
        scale=s["scale"],
        dynamic=s["dynamic"],
    )
