"""Windowing and window-level feature extraction.

A recording is resampled onto a uniform grid, cut into fixed-duration
non-overlapping windows, and each window is summarized by a fixed-layout
feature vector drawn from up to three channel groups:

* ``raw``     - the acceleration axes ax, ay, az
* ``rotvec``  - the smoothed, decimated rotation-vector axes rx, ry, rz,
                plus the rotation vector of the window's median gravity
* ``gyro``    - gx, gy, gz when a gyroscope stream is present

Every channel contributes the same eight descriptors (fuzzy entropy, mean,
std, max, min, IQR, MAD, energy).  The layout is versioned; models refuse
feature vectors whose layout does not match the one they were trained on.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .errors import DegenerateGravityError, InvalidArgumentError

log = logging.getLogger(__name__)

LAYOUT_VERSION = "1"

# Descriptor order within each channel block.  Fixed; changing it requires a
# new LAYOUT_VERSION.
DESCRIPTOR_NAMES = ("fuzzy_entropy", "mean", "std", "max", "min", "iqr", "mad", "energy")
RAW_CHANNELS = ("ax", "ay", "az")
ROTVEC_CHANNELS = ("rx", "ry", "rz")
GYRO_CHANNELS = ("gx", "gy", "gz")
GRAVITY_RV_NAMES = ("grav_rx", "grav_ry", "grav_rz")

# Source gaps longer than this are filled by holding the last value instead
# of interpolating, and the affected windows are flagged.
MAX_INTERP_GAP_NS = 1_000_000_000


@dataclass(frozen=True)
class ImuSample:
    """One timestamped IMU sample (nanoseconds since epoch, m/s^2, rad/s)."""

    t: int
    accel: np.ndarray
    gyro: np.ndarray | None = None


@dataclass
class ImuRecording:
    """A timestamped tri-axial acceleration stream with optional gyroscope.

    ``t`` is an int64 array of nanosecond timestamps, strictly increasing;
    ``accel`` (and ``gyro`` when present) are (N, 3) float arrays.
    """

    t: np.ndarray
    accel: np.ndarray
    nominal_rate: float
    gyro: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.accel = np.asarray(self.accel, dtype=float)
        if self.gyro is not None:
            self.gyro = np.asarray(self.gyro, dtype=float)
        if self.t.ndim != 1 or self.accel.shape != (len(self.t), 3):
            raise InvalidArgumentError(
                f"ImuRecording: t {self.t.shape} and accel {self.accel.shape} do not line up"
            )
        if self.gyro is not None and self.gyro.shape != self.accel.shape:
            raise InvalidArgumentError("ImuRecording: gyro shape differs from accel")
        if len(self.t) == 0:
            raise InvalidArgumentError("ImuRecording: empty recording")
        if self.nominal_rate <= 0:
            raise InvalidArgumentError(f"ImuRecording: nominal_rate {self.nominal_rate} <= 0")
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            i = int(np.argmin(np.diff(self.t) > 0))
            raise InvalidArgumentError(
                f"ImuRecording: timestamps not strictly increasing at "
                f"t={self.t[i]} followed by t={self.t[i + 1]}"
            )
        if not np.all(np.isfinite(self.accel)):
            raise InvalidArgumentError("ImuRecording: non-finite acceleration values")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_samples(cls, samples: list[ImuSample], nominal_rate: float) -> "ImuRecording":
        t = np.array([s.t for s in samples], dtype=np.int64)
        accel = np.array([s.accel for s in samples], dtype=float)
        gyro = None
        if samples and samples[0].gyro is not None:
            gyro = np.array([s.gyro for s in samples], dtype=float)
        return cls(t=t, accel=accel, nominal_rate=nominal_rate, gyro=gyro)


@dataclass
class Window:
    """A fixed-duration slice of a uniformly resampled recording.

    Samples lie in ``[start_t, end_t)``.  ``gap_filled`` is set when any
    sample in the window came from hold-last-value filling of a long gap.
    """

    index: int
    t: np.ndarray
    accel: np.ndarray
    start_t: int
    end_t: int
    rate: float
    gyro: np.ndarray | None = None
    gap_filled: bool = False

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class RotVecSequence:
    """Per-timestamp rotation vectors for one window, at ``rate`` Hz."""

    vectors: np.ndarray
    rate: float

    def __len__(self) -> int:
        return len(self.vectors)


def _resample_uniform(rec: ImuRecording, rate: float):
    """Resample onto a uniform grid at ``rate`` Hz starting at the first timestamp.

    Linear interpolation everywhere except inside source gaps longer than
    ``MAX_INTERP_GAP_NS``, which hold the last value.  Returns
    ``(t_grid, accel, gyro, held_mask)``.
    """
    step_ns = int(round(1e9 / rate))
    t0, t_last = int(rec.t[0]), int(rec.t[-1])
    n = (t_last - t0) // step_ns + 1
    grid = t0 + step_ns * np.arange(n, dtype=np.int64)

    if len(rec.t) == n and rec.t[-1] == grid[-1] and np.array_equal(rec.t, grid):
        held = np.zeros(n, dtype=bool)
        return grid, rec.accel, rec.gyro, held

    src_t = rec.t.astype(float)
    grid_f = grid.astype(float)
    cols = [np.interp(grid_f, src_t, rec.accel[:, k]) for k in range(3)]
    accel = np.stack(cols, axis=1)
    gyro = None
    if rec.gyro is not None:
        gyro = np.stack([np.interp(grid_f, src_t, rec.gyro[:, k]) for k in range(3)], axis=1)

    # Hold-last-value inside long gaps.
    left = np.searchsorted(rec.t, grid, side="right") - 1
    left = np.clip(left, 0, len(rec.t) - 2)
    gap_len = rec.t[left + 1] - rec.t[left]
    held = (gap_len > MAX_INTERP_GAP_NS) & (grid > rec.t[left]) & (grid < rec.t[left + 1])
    if np.any(held):
        accel[held] = rec.accel[left[held]]
        if gyro is not None:
            gyro[held] = rec.gyro[left[held]]
        log.info("resample: %d of %d grid points filled by holding across long gaps",
                 int(held.sum()), n)
    return grid, accel, gyro, held


def segment_windows(rec: ImuRecording, window_seconds: float, rate: float) -> list[Window]:
    """Cut a recording into consecutive non-overlapping fixed-length windows.

    The recording is first resampled to a uniform grid at ``rate``; a trailing
    fragment shorter than ``window_seconds`` is discarded.  A recording shorter
    than one window yields an empty list.
    """
    if window_seconds <= 0:
        raise InvalidArgumentError(f"segment_windows: window_seconds {window_seconds} <= 0")
    if rate <= 0:
        raise InvalidArgumentError(f"segment_windows: rate {rate} <= 0")
    grid, accel, gyro, held = _resample_uniform(rec, rate)
    n_per = int(round(window_seconds * rate))
    step_ns = int(round(1e9 / rate))
    count = len(grid) // n_per
    windows = []
    for m in range(count):
        lo, hi = m * n_per, (m + 1) * n_per
        windows.append(
            Window(
                index=m,
                t=grid[lo:hi],
                accel=accel[lo:hi],
                gyro=None if gyro is None else gyro[lo:hi],
                start_t=int(grid[lo]),
                end_t=int(grid[lo]) + n_per * step_ns,
                rate=rate,
                gap_filled=bool(held[lo:hi].any()),
            )
        )
    return windows


def median_gravity(w: Window) -> np.ndarray:
    """Component-wise median acceleration over a window (even counts average)."""
    if len(w) < 1:
        raise InvalidArgumentError("median_gravity: empty window")
    return np.median(w.accel, axis=0)


def _centered_moving_average(x: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with an odd window, shrinking at the edges."""
    if width <= 1:
        return x
    half = width // 2
    n = len(x)
    c = np.zeros((n + 1,) + x.shape[1:])
    np.cumsum(x, axis=0, out=c[1:])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    counts = (hi - lo).astype(float)
    if x.ndim > 1:
        counts = counts[:, None]
    return (c[hi] - c[lo]) / counts


@dataclass(frozen=True)
class SmoothingConfig:
    """Preprocessing knobs for the rotation-vector sequence."""

    smooth_seconds: float = 0.25
    seq_rate: float = 20.0


def rotation_vector_sequence(w: Window, cfg: SmoothingConfig = SmoothingConfig()) -> RotVecSequence:
    """Rotation-vector series for a window.

    The acceleration is smoothed by a centered moving average of
    ``cfg.smooth_seconds``, decimated to ``cfg.seq_rate``, and mapped to
    rotation vectors with the pitch-hold / roll-unfold continuity policy
    threaded across the window.  Degenerate samples reuse the previous
    rotation vector (zero if the window starts degenerate).
    """
    if cfg.seq_rate <= 0 or cfg.smooth_seconds < 0:
        raise InvalidArgumentError(f"rotation_vector_sequence: bad config {cfg}")
    step = w.rate / cfg.seq_rate
    if abs(step - round(step)) > 1e-9 or round(step) < 1:
        raise InvalidArgumentError(
            f"rotation_vector_sequence: rate {w.rate} is not an integer multiple "
            f"of seq_rate {cfg.seq_rate}"
        )
    step = int(round(step))
    width = max(1, int(round(cfg.smooth_seconds * w.rate)))
    smoothed = _centered_moving_average(w.accel, width)
    dec = smoothed[::step]
    vecs, near, degen = geom.rotation_vector_path(dec)
    if np.any(degen):
        log.info("window %d: %d degenerate samples reused the previous rotation vector",
                 w.index, int(degen.sum()))
    return RotVecSequence(vectors=vecs, rate=w.rate / step)


def fuzzy_entropy(series, m_embed: int = 2, r_tol_frac: float = 0.2, n_grad: int = 2) -> float:
    """Fuzzy entropy of a 1-D series.

    Embedded vectors of length ``m_embed`` and ``m_embed + 1`` are formed with
    their own means removed; pair similarity is the fuzzy membership
    ``exp(-(d/r)**n_grad)`` of the Chebyshev distance ``d``, with tolerance
    ``r = r_tol_frac * std(series)`` (population std).  The result is
    ``ln(phi_m) - ln(phi_m1)`` where each phi averages the memberships over
    all ordered pairs of distinct vectors.  A series with population std below
    1e-12 returns 0 by convention.

    Both phases use the same ``L - m_embed`` vector start positions, so the
    series must have at least ``m_embed + 2`` samples.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"fuzzy_entropy: expected 1-D series, got shape {x.shape}")
    if m_embed < 1:
        raise InvalidArgumentError(f"fuzzy_entropy: m_embed {m_embed} < 1")
    if r_tol_frac <= 0:
        raise InvalidArgumentError(f"fuzzy_entropy: r_tol_frac {r_tol_frac} <= 0")
    L = len(x)
    if L < m_embed + 2:
        raise InvalidArgumentError(
            f"fuzzy_entropy: series of length {L} is shorter than m_embed + 2 = {m_embed + 2}"
        )
    std = float(x.std())
    if std < 1e-12:
        return 0.0
    r = r_tol_frac * std
    K = L - m_embed
    return math.log(_phi_membership(x, m_embed, K, r, n_grad)) - math.log(
        _phi_membership(x, m_embed + 1, K, r, n_grad)
    )


# Pairwise distance matrices dominate the entropy cost; reusing scratch
# buffers avoids re-faulting megabytes of fresh pages on every call.
# threading.local keeps parallel window processing safe.
_scratch = threading.local()


def _scratch_pair(K: int):
    cap = getattr(_scratch, "cap", 0)
    if cap < K:
        _scratch.d = np.empty((K, K))
        _scratch.tmp = np.empty((K, K))
        _scratch.cap = K
    return _scratch.d[:K, :K], _scratch.tmp[:K, :K]


def _phi_membership(x: np.ndarray, m: int, K: int, r: float, n_grad: int) -> float:
    """Mean fuzzy membership over ordered pairs of distinct m-length vectors."""
    emb = np.lib.stride_tricks.sliding_window_view(x, m)[:K]
    emb = emb - emb.mean(axis=1, keepdims=True)
    cols = [np.ascontiguousarray(emb[:, k]) for k in range(m)]
    d, tmp = _scratch_pair(K)
    np.subtract(cols[0][:, None], cols[0][None, :], out=d)
    np.abs(d, out=d)
    for k in range(1, m):
        np.subtract(cols[k][:, None], cols[k][None, :], out=tmp)
        np.abs(tmp, out=tmp)
        np.maximum(d, tmp, out=d)
    # membership exp(-(d/r)^n), computed in place
    d /= r
    if n_grad == 2:
        np.multiply(d, d, out=d)
    else:
        np.power(d, n_grad, out=d)
    np.negative(d, out=d)
    np.exp(d, out=d)
    total = float(d.sum()) - float(np.trace(d))
    return total / (K * (K - 1))


def stat_descriptors(series):
    """(mean, std, max, min, iqr, mad) with population std and type-7 quantiles."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise InvalidArgumentError("stat_descriptors: expected a non-empty 1-D series")
    q75, q25 = np.percentile(x, [75.0, 25.0])
    med = np.median(x)
    return (
        float(x.mean()),
        float(x.std()),
        float(x.max()),
        float(x.min()),
        float(q75 - q25),
        float(np.median(np.abs(x - med))),
    )


def energy(series) -> float:
    """Mean of squares of a series."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise InvalidArgumentError("energy: expected a non-empty 1-D series")
    return float(np.mean(x * x))


@dataclass(frozen=True)
class FeatureConfig:
    """Feature extraction configuration.

    ``ablate_rotvec`` drops the rotation-vector channel group (raw-only
    features); ``ablate_raw`` drops the raw group.  At most one may be set.
    """

    seq_rate: float = 20.0
    smooth_seconds: float = 0.25
    m_embed: int = 2
    r_tol_frac: float = 0.2
    n_grad: int = 2
    ablate_rotvec: bool = False
    ablate_raw: bool = False
    use_gyro: bool = True

    def __post_init__(self):
        if self.ablate_rotvec and self.ablate_raw:
            raise InvalidArgumentError("FeatureConfig: cannot ablate both channel groups")

    @property
    def smoothing(self) -> SmoothingConfig:
        return SmoothingConfig(smooth_seconds=self.smooth_seconds, seq_rate=self.seq_rate)


def active_groups(cfg: FeatureConfig, has_gyro: bool) -> tuple[str, ...]:
    groups = []
    if not cfg.ablate_raw:
        groups.append("raw")
    if not cfg.ablate_rotvec:
        groups.append("rotvec")
    if has_gyro and cfg.use_gyro:
        groups.append("gyro")
    return tuple(groups)


def feature_names(cfg: FeatureConfig, has_gyro: bool = False) -> tuple[str, ...]:
    """Fixed, documented feature ordering for the active channel groups.

    Raw channels come first so that a raw-only layout is a prefix of the full
    layout; the median-gravity rotation vector belongs to the rotvec group.
    """
    names: list[str] = []
    groups = active_groups(cfg, has_gyro)
    if "raw" in groups:
        names += [f"{ch}_{d}" for ch in RAW_CHANNELS for d in DESCRIPTOR_NAMES]
    if "rotvec" in groups:
        names += [f"{ch}_{d}" for ch in ROTVEC_CHANNELS for d in DESCRIPTOR_NAMES]
        names += list(GRAVITY_RV_NAMES)
    if "gyro" in groups:
        names += [f"{ch}_{d}" for ch in GYRO_CHANNELS for d in DESCRIPTOR_NAMES]
    return tuple(names)


@dataclass
class FeatureVector:
    """One window's features, aligned with :func:`feature_names`."""

    values: np.ndarray
    names: tuple[str, ...]
    groups: tuple[str, ...]
    layout_version: str = LAYOUT_VERSION


def _channel_descriptors(series: np.ndarray, cfg: FeatureConfig,
                         entropy_series: np.ndarray | None = None) -> list[float]:
    """The eight per-channel descriptors, optionally with a separate entropy input."""
    ent = series if entropy_series is None else entropy_series
    fe = fuzzy_entropy(ent, cfg.m_embed, cfg.r_tol_frac, cfg.n_grad)
    mean, std, mx, mn, iqr, mad = stat_descriptors(series)
    return [fe, mean, std, mx, mn, iqr, mad, energy(series)]


def assemble_features(w: Window, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Feature vector for a single window.

    Raises :class:`DegenerateGravityError` when the rotation-vector branch is
    enabled and the window's median gravity is too small to orient; stream
    callers drop such windows.
    """
    has_gyro = w.gyro is not None
    groups = active_groups(cfg, has_gyro)
    values: list[float] = []

    # Fuzzy entropy cost is quadratic in series length, so entropy for the
    # full-rate channels is computed on the same decimated grid as the
    # rotation-vector sequence; the other descriptors use every sample.
    step = max(1, int(round(w.rate / cfg.seq_rate)))

    if "raw" in groups:
        for k in range(3):
            col = w.accel[:, k]
            values += _channel_descriptors(col, cfg, entropy_series=col[::step])

    if "rotvec" in groups:
        seq = rotation_vector_sequence(w, cfg.smoothing)
        for k in range(3):
            values += _channel_descriptors(seq.vectors[:, k], cfg)
        grav = median_gravity(w)
        values += list(geom.rotation_vector_from_gravity(grav))

    if "gyro" in groups:
        for k in range(3):
            col = w.gyro[:, k]
            values += _channel_descriptors(col, cfg, entropy_series=col[::step])

    vec = np.array(values)
    if not np.all(np.isfinite(vec)):
        raise InvalidArgumentError(f"assemble_features: non-finite feature in window {w.index}")
    return FeatureVector(values=vec, names=feature_names(cfg, has_gyro), groups=groups)


@dataclass
class WindowFeatures:
    """Feature matrix for the windows of one recording, in window order."""

    names: tuple[str, ...]
    matrix: np.ndarray
    window_index: np.ndarray
    start_ns: np.ndarray
    end_ns: np.ndarray
    gap_filled: np.ndarray
    groups: tuple[str, ...]
    layout_version: str = LAYOUT_VERSION
    labels: np.ndarray | None = None  # "sit"/"nonsit" strings when labeled
    dropped: list[tuple[int, str]] = field(default_factory=list)


def featurize_recording(
    rec: ImuRecording,
    window_seconds: float,
    rate: float,
    cfg: FeatureConfig = FeatureConfig(),
) -> WindowFeatures:
    """Segment a recording and extract features for every window.

    Windows whose rotation-vector branch fails outright (degenerate median
    gravity) are dropped and logged, never silently zeroed.
    """
    windows = segment_windows(rec, window_seconds, rate)
    has_gyro = rec.gyro is not None
    names = feature_names(cfg, has_gyro)
    rows, kept, dropped = [], [], []
    for w in windows:
        try:
            rows.append(assemble_features(w, cfg).values)
            kept.append(w)
        except (DegenerateGravityError, InvalidArgumentError) as exc:
            dropped.append((w.index, str(exc)))
            log.warning("dropping window %d: %s", w.index, exc)
    matrix = np.array(rows) if rows else np.empty((0, len(names)))
    return WindowFeatures(
        names=names,
        matrix=matrix,
        window_index=np.array([w.index for w in kept], dtype=int),
        start_ns=np.array([w.start_t for w in kept], dtype=np.int64),
        end_ns=np.array([w.end_t for w in kept], dtype=np.int64),
        gap_filled=np.array([w.gap_filled for w in kept], dtype=bool),
        groups=active_groups(cfg, has_gyro),
        dropped=dropped,
    )
