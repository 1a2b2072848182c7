"""Scenario-scripted synthetic IMU recordings with ground-truth labels.

Stands in for real office recordings: each scenario is an ordered list of
activity segments.  A segment pins a mean arm pose (pitch/roll), an
orientation jitter level, and a sinusoidal dynamic-acceleration component;
the generator integrates a mean-reverting jitter walk around the pose,
pushes gravity through the watch-frame forward model, and adds the dynamic
component plus white sensor noise.  Everything is driven by one seed, so a
scenario generates byte-identical data every time.

Desk-constrained sitting poses cluster around pitch near -90 deg (forearm
resting on the desk); standing poses hang near pitch 0.  Scenario files can
move the poses anywhere, including right on top of each other.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgumentError
from .evaluation import LabelInterval
from .features import ImuRecording
from .model import NONSIT, SIT

GRAVITY_MS2 = 9.81

ACTIVITIES = ("sit_typing", "sit_still", "stand_still", "walk", "gesture")
SIT_ACTIVITIES = frozenset({"sit_typing", "sit_still"})


@dataclass(frozen=True)
class Segment:
    duration_s: float
    activity: str
    pose_phi: float  # radians
    pose_theta: float  # radians
    pose_jitter: float = 0.0  # radians, stationary std of the jitter walk
    dyn_accel_amp: float = 0.0  # m/s^2
    dyn_accel_hz: float = 0.0
    jitter_tau_s: float = 1.0  # mean-reversion time constant of the jitter walk

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidArgumentError(f"Segment: duration {self.duration_s} <= 0")
        if self.activity not in ACTIVITIES:
            raise InvalidArgumentError(f"Segment: unknown activity {self.activity!r}")
        if self.pose_jitter < 0 or self.dyn_accel_amp < 0 or self.dyn_accel_hz < 0:
            raise InvalidArgumentError("Segment: negative jitter/amplitude/frequency")
        if self.jitter_tau_s <= 0:
            raise InvalidArgumentError(f"Segment: jitter_tau_s {self.jitter_tau_s} <= 0")

    @property
    def label(self) -> str:
        return SIT if self.activity in SIT_ACTIVITIES else NONSIT


@dataclass(frozen=True)
class Scenario:
    segments: tuple[Segment, ...]
    noise_std: float = 0.0  # m/s^2, white accelerometer noise
    seed: int = 0

    def __post_init__(self):
        if not self.segments:
            raise InvalidArgumentError("Scenario: no segments")
        if self.noise_std < 0:
            raise InvalidArgumentError(f"Scenario: noise_std {self.noise_std} < 0")


def _jitter_walk(rng: np.random.Generator, n: int, std: float, dt: float, tau: float) -> np.ndarray:
    """Mean-reverting (leaky) random walk with stationary std ``std``.

    ``tau`` sets how quickly the walk forgets: small values give fast
    tremor-like wander, large values slow drifts of the same magnitude.
    """
    if std == 0.0 or n == 0:
        return np.zeros(n)
    a = math.exp(-dt / tau)
    innov = rng.normal(0.0, std * math.sqrt(1.0 - a * a), size=n)
    x0 = rng.normal(0.0, std)
    out, _ = lfilter([1.0], [1.0, -a], innov, zi=np.array([a * x0]))
    return out


def generate(sc: Scenario, rate: float = 100.0) -> tuple[ImuRecording, list[LabelInterval]]:
    """Synthesize a recording and the label intervals that exactly tile it."""
    if rate <= 0:
        raise InvalidArgumentError(f"generate: rate {rate} <= 0")
    rng = np.random.default_rng(sc.seed)
    step_ns = int(round(1e9 / rate))
    dt = 1.0 / rate

    chunks = []
    intervals = []
    t_cursor = 0
    for seg in sc.segments:
        n = int(round(seg.duration_s * rate))
        phi = seg.pose_phi + _jitter_walk(rng, n, seg.pose_jitter, dt, seg.jitter_tau_s)
        theta = seg.pose_theta + _jitter_walk(rng, n, seg.pose_jitter, dt, seg.jitter_tau_s)

        ct = np.cos(theta)
        accel = np.stack(
            [
                GRAVITY_MS2 * np.sin(theta),
                -GRAVITY_MS2 * np.sin(phi) * ct,
                -GRAVITY_MS2 * np.cos(phi) * ct,
            ],
            axis=1,
        )

        if seg.dyn_accel_amp > 0.0 and seg.dyn_accel_hz > 0.0:
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            t_rel = np.arange(n) * dt
            wave = seg.dyn_accel_amp * np.sin(2.0 * math.pi * seg.dyn_accel_hz * t_rel + phase)
            accel += wave[:, None] * direction[None, :]

        if sc.noise_std > 0.0:
            accel += rng.normal(0.0, sc.noise_std, size=accel.shape)

        chunks.append(accel)
        intervals.append(
            LabelInterval(start_t=t_cursor, end_t=t_cursor + n * step_ns, label=seg.label)
        )
        t_cursor += n * step_ns

    accel = np.concatenate(chunks, axis=0)
    t = np.arange(len(accel), dtype=np.int64) * step_ns
    rec = ImuRecording(t=t, accel=accel, nominal_rate=rate)
    return rec, intervals


# ---------------------------------------------------------------------------
# Scenario files: JSON with angles in degrees (friendlier to edit by hand).
# ---------------------------------------------------------------------------

BUILTIN_SCENARIOS = ("benchmark_day", "hard_day")


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        segs = tuple(
            Segment(
                duration_s=float(s["duration_s"]),
                activity=str(s["activity"]),
                pose_phi=math.radians(float(s["pose_phi_deg"])),
                pose_theta=math.radians(float(s["pose_theta_deg"])),
                pose_jitter=math.radians(float(s.get("pose_jitter_deg", 0.0))),
                dyn_accel_amp=float(s.get("dyn_accel_amp", 0.0)),
                dyn_accel_hz=float(s.get("dyn_accel_hz", 0.0)),
                jitter_tau_s=float(s.get("jitter_tau_s", 1.0)),
            )
            for s in doc["segments"]
        )
        return Scenario(
            segments=segs,
            noise_std=float(doc.get("noise_std", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise InvalidArgumentError(f"scenario: missing field {exc}") from exc


def load_scenario(name_or_path) -> Scenario:
    """Load a scenario JSON file, or one of the built-ins by name
    (``benchmark_day``, ``hard_day``)."""
    name = str(name_or_path)
    if name in BUILTIN_SCENARIOS:
        text = resources.files("sitwatch.scenarios").joinpath(f"{name}.json").read_text()
    else:
        with open(name, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"scenario {name!r}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc)
