"""Euler-Maruyama sample paths with stationary initialisation.

Each replicate owns a counter-based Philox stream keyed by ``seed ^ index``;
the first uniform of the stream (when stationary initialisation is on) feeds
the inverse-CDF draw of ``X_0`` and the following standard normals drive the
increments.  Replicates are stepped in lockstep as a batch, but every
operation is elementwise, so a path does not depend on which batch it was
simulated in.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, SimulationDivergedError
from .models import DiffusionModel
from .stationary import DensityTable, build_density

DIVERGENCE_BOUND = 1e6
_CHUNK = 8192
_MAGIC = b"MSMLPATH"
_VERSION = 1
_SEED_MASK = (1 << 64) - 1


@dataclass(eq=False)
class SamplePath:
    """Observation record ``X_0, ..., X_N`` on the uniform grid ``t_j = t0 + j h``."""

    h: float
    values: np.ndarray
    seed: int = 0
    theta_true: Optional[np.ndarray] = None
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("a sample path needs at least two observations")
        if not self.h > 0:
            raise ValueError("grid step must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample path contains non-finite values")
        if self.theta_true is not None:
            self.theta_true = np.asarray(self.theta_true, dtype=float).reshape(-1)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.h

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.values.size)

    def index_at(self, t: float) -> int:
        """Largest grid index ``j`` with ``j h <= t`` (tolerant to rounding)."""
        j = int(np.floor(t / self.h + 1e-7))
        return min(max(j, 0), self.n_steps)

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        same_theta = (self.theta_true is None and other.theta_true is None) or (
            self.theta_true is not None
            and other.theta_true is not None
            and np.array_equal(self.theta_true, other.theta_true)
        )
        return (
            self.h == other.h
            and self.t0 == other.t0
            and self.seed == other.seed
            and same_theta
            and np.array_equal(self.values, other.values)
        )

    # -- serialisation ----------------------------------------------------

    def to_csv(self, target=None) -> str:
        """Write ``t,x`` rows at 17 significant digits."""
        buf = io.StringIO()
        buf.write(f"# h={self.h!r} seed={self.seed}")
        if self.theta_true is not None:
            buf.write(" theta=" + ",".join(repr(float(v)) for v in self.theta_true))
        buf.write("\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "x"])
        for t, x in zip(self.times, self.values):
            writer.writerow([f"{t:.17g}", f"{x:.17g}"])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "SamplePath":
        text = source if "\n" in str(source) else Path(source).read_text()
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            for tok in lines[0][1:].split():
                k, _, v = tok.partition("=")
                meta[k] = v
            lines = lines[1:]
        rows = list(csv.reader(lines))
        if rows[0] != ["t", "x"]:
            raise ValueError("path CSV must have header 't,x'")
        t = np.array([float(r[0]) for r in rows[1:]])
        x = np.array([float(r[1]) for r in rows[1:]])
        h = float(meta["h"]) if "h" in meta else float(t[1] - t[0])
        theta = (
            np.array([float(v) for v in meta["theta"].split(",")]) if "theta" in meta else None
        )
        return cls(h=h, values=x, seed=int(meta.get("seed", 0)), theta_true=theta, t0=float(t[0]))

    def to_bytes(self) -> bytes:
        """Compact binary record: header (h, N, seed, theta) then float64 payload."""
        theta = np.zeros(0) if self.theta_true is None else self.theta_true
        header = struct.pack(
            "<8sIdQQdI",
            _MAGIC,
            _VERSION,
            self.h,
            self.n_steps,
            int(self.seed) & _SEED_MASK,
            self.t0,
            theta.size if self.theta_true is not None else 0xFFFFFFFF,
        )
        return header + theta.astype("<f8").tobytes() + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SamplePath":
        head = struct.calcsize("<8sIdQQdI")
        magic, version, h, n, seed, t0, d = struct.unpack("<8sIdQQdI", blob[:head])
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not a sample-path record")
        off = head
        theta = None
        if d != 0xFFFFFFFF:
            theta = np.frombuffer(blob, "<f8", count=d, offset=off).copy()
            off += 8 * d
        values = np.frombuffer(blob, "<f8", count=n + 1, offset=off).copy()
        return cls(h=h, values=values, seed=seed, theta_true=theta, t0=t0)

    def write_binary(self, target) -> None:
        Path(target).write_bytes(self.to_bytes())

    @classmethod
    def read_binary(cls, source) -> "SamplePath":
        return cls.from_bytes(Path(source).read_bytes())


def replicate_generator(seed: int, index: int = 0) -> np.random.Generator:
    """Philox stream for replicate ``index`` of experiment ``seed``."""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(index)) & _SEED_MASK))


def n_steps_for(T: float, h: float) -> int:
    """Number of steps ``N`` with ``N h == T`` to 1e-12 relative."""
    if not h > 0:
        raise ConfigError("grid step h must be positive")
    if not T >= h:
        raise ConfigError(f"horizon T={T} must be at least one step h={h}")
    n = int(round(T / h))
    if abs(n * h - T) > 1e-12 * T:
        raise ConfigError(f"T={T} is not an integer multiple of h={h}")
    return n


def _lockstep(model, theta, x0, n_steps, h, gens, noise=None):
    """Euler-Maruyama for a batch; returns ``(paths, first_bad_step)``.

    ``first_bad_step[i]`` is -1 for paths that stayed finite and bounded.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    m = len(x0)
    out = np.empty((m, n_steps + 1))
    out[:, 0] = x0
    x = np.array(x0, dtype=float)
    sqrt_h = np.sqrt(h)
    alive = np.ones(m, dtype=bool)
    bad_step = np.full(m, -1)
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, n_steps, _CHUNK):
            stop = min(start + _CHUNK, n_steps)
            if noise is not None:
                z = np.asarray(noise, dtype=float).reshape(m, -1)[:, start:stop]
            else:
                z = np.stack([g.standard_normal(stop - start) for g in gens])
            for k in range(stop - start):
                x = x + model.drift(theta, x) * h + model.sigma(x) * sqrt_h * z[:, k]
                out[:, start + k + 1] = x
            block = out[:, start + 1 : stop + 1]
            offending = ~(np.abs(block) <= DIVERGENCE_BOUND)
            newly = alive & offending.any(axis=1)
            if newly.any():
                for i in np.nonzero(newly)[0]:
                    bad_step[i] = start + 1 + int(np.argmax(offending[i]))
                alive &= ~newly
                x = np.where(alive, x, np.nan)
    return out, bad_step


def euler_maruyama(
    model: DiffusionModel,
    theta,
    x0: float,
    T: float,
    h: float,
    seed: int,
    noise: Optional[np.ndarray] = None,
    replicate: int = 0,
) -> SamplePath:
    """``X_{j+1} = X_j + S(theta, X_j) h + sigma(X_j) sqrt(h) Z_j``.

    ``noise`` overrides the generator with explicit ``Z_j`` (test hook).

    Raises
    ------
    SimulationDivergedError
        When ``|X_j|`` exceeds ``1e6`` or turns non-finite.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = n_steps_for(T, h)
    gens = None if noise is not None else [replicate_generator(seed, replicate)]
    out, bad = _lockstep(model, theta, [float(x0)], n, h, gens, noise)
    if bad[0] >= 0:
        raise SimulationDivergedError(bad[0])
    return SamplePath(h=h, values=out[0], seed=seed, theta_true=theta)


def stationary_draw(model: DiffusionModel, theta, seed: int, table: Optional[DensityTable] = None) -> float:
    """One draw from the invariant law by inverse CDF on the tabulated cumulative."""
    table = table if table is not None else build_density(model, theta)
    u = replicate_generator(seed, 0).random()
    return float(table.quantile(u))


def stationary_draws(table: DensityTable, seed: int, size: int) -> np.ndarray:
    """``size`` i.i.d. draws from the invariant law, one Philox stream."""
    u = replicate_generator(seed, 0).random(size)
    return table.quantile(u)


@dataclass
class BatchResult:
    """Paths for a block of replicate indices; diverged rows hold NaNs."""

    indices: np.ndarray
    values: np.ndarray
    bad_step: np.ndarray
    h: float
    seed: int
    theta: np.ndarray = field(repr=False)

    def path(self, row: int) -> SamplePath:
        if self.bad_step[row] >= 0:
            raise SimulationDivergedError(self.bad_step[row])
        return SamplePath(
            h=self.h,
            values=self.values[row],
            seed=(self.seed ^ int(self.indices[row])) & _SEED_MASK,
            theta_true=self.theta,
        )


def simulate_paths(
    model: DiffusionModel,
    theta,
    T: float,
    h: float,
    seed: int,
    indices: Sequence[int],
    init: str = "stationary",
    x0: Optional[float] = None,
    init_range: Optional[tuple] = None,
    table: Optional[DensityTable] = None,
    noise_free: bool = False,
) -> BatchResult:
    """Simulate replicates ``indices`` of experiment ``seed`` in lockstep.

    Parameters
    ----------
    init : {"stationary", "burn_in", "fixed"}
        ``stationary`` draws ``X_0`` by inverse CDF from the invariant law;
        ``burn_in`` starts at the midpoint of ``init_range`` and discards
        ``max(10/h, 1e4)`` steps; ``fixed`` starts every path at ``x0``.
    noise_free : bool
        Replace all Gaussian increments by zero (test hook).
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    indices = np.asarray(indices, dtype=np.int64)
    n = n_steps_for(T, h)
    gens = [replicate_generator(seed, i) for i in indices]
    m = len(indices)
    if init == "stationary":
        table = table if table is not None else build_density(model, theta)
        start = table.quantile(np.array([g.random() for g in gens]))
    elif init == "fixed":
        if x0 is None:
            raise ConfigError("init='fixed' needs x0")
        start = np.full(m, float(x0))
    elif init == "burn_in":
        if init_range is None:
            raise ConfigError("init='burn_in' needs init_range")
        mid = 0.5 * (float(init_range[0]) + float(init_range[1]))
        n_burn = int(max(np.ceil(10.0 / h), 10_000))
        zeros = np.zeros((m, n_burn)) if noise_free else None
        warm, bad = _lockstep(model, theta, np.full(m, mid), n_burn, h, gens, zeros)
        start = warm[:, -1]
    else:
        raise ConfigError(f"unknown init mode {init!r}")
    noise = np.zeros((m, n)) if noise_free else None
    values, bad_step = _lockstep(model, theta, start, n, h, gens, noise)
    if init == "burn_in":
        bad_step = np.where(bad >= 0, 0, bad_step)
    return BatchResult(indices, values, bad_step, h, int(seed), theta)
