"""Finite-activity jump measures and Poisson random measure sampling.

A realization of the driving noise on the window [0,T] x [-R,R] is a finite
set of atoms (t_i, x_i, z_i): a Poisson number of space-time points, uniform
on the window, each carrying an i.i.d. jump size drawn from the normalized
jump measure.  Everything downstream (integrals, solvers, derivatives) is a
deterministic function of one such configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import integrate


class NoiseError(ValueError):
    """Invalid measure parameterization or configuration operation."""


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream #index split off a master seed.

    Uses SeedSequence(master_seed, spawn_key=(index,)), a counter-based
    derivation: stream `index` is identical no matter how many sibling
    streams exist or in which order they are created.
    """
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _as_rng(seed) -> np.random.Generator:
    # int -> plain seeded generator; (master, index) -> derived stream
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple) and len(seed) == 2:
        return derive_rng(int(seed[0]), int(seed[1]))
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SpaceTimeWindow:
    """Bounded simulation window [0,T] x [-R,R]."""

    T: float
    R: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise NoiseError(f"horizon T must be finite positive, got {self.T}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise NoiseError(f"half-width R must be finite positive, got {self.R}")

    @property
    def volume(self) -> float:
        return 2.0 * self.R * self.T


_QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class LevyMeasure:
    """A jump-size measure nu with finite total mass and cached moments.

    total_mass    nu(R \\ {0}), the expected atom count per unit volume
    second_moment int z^2 nu(dz)  (written v below)
    first_moment  int z  nu(dz)   (the compensator density; 0 for symmetric kinds)

    Moments are exact sums for atomic kinds and adaptive quadrature
    (rel. tol 1e-10) for density kinds; symmetric density parameterizations
    set first_moment to exactly 0.0 so that downstream code can branch on
    `first_moment == 0` without quadrature noise.
    """

    kind: str
    params: tuple
    total_mass: float
    second_moment: float
    first_moment: float

    def __post_init__(self):
        v, m1, mass = self.second_moment, self.first_moment, self.total_mass
        for label, val in (("total_mass", mass), ("second_moment", v),
                           ("first_moment", m1)):
            if not math.isfinite(val):
                raise NoiseError(f"{label} is not finite: {val}")
        if mass < 0 or v < 0:
            raise NoiseError("total_mass and second_moment must be nonnegative")
        if mass > 0 and v == 0:
            raise NoiseError("second_moment can vanish only for the zero measure")
        # Cauchy-Schwarz: (int z nu)^2 <= (int z^2 nu) * nu(R0)
        if m1 * m1 > v * mass * (1.0 + 1e-9) + 1e-300:
            raise NoiseError("moments violate Cauchy-Schwarz; inconsistent measure")

    def describe(self) -> dict:
        return {"kind": self.kind, "params": list(self.params),
                "total_mass": self.total_mass,
                "second_moment": self.second_moment,
                "first_moment": self.first_moment}


def moments(measure: LevyMeasure) -> tuple[float, float, float]:
    """(second moment, first moment, total mass) of the jump measure."""
    return measure.second_moment, measure.first_moment, measure.total_mass


def two_point_measure(jump: float, mass: float = 1.0) -> LevyMeasure:
    """Symmetric two-point measure mass*(delta_{+jump} + delta_{-jump})/2."""
    if jump <= 0 or not math.isfinite(jump):
        raise NoiseError(f"jump size must be finite positive, got {jump}")
    if mass < 0 or not math.isfinite(mass):
        raise NoiseError(f"mass must be finite nonnegative, got {mass}")
    return LevyMeasure("two_point", (jump, mass),
                       total_mass=mass,
                       second_moment=mass * jump * jump,
                       first_moment=0.0)


def rademacher() -> LevyMeasure:
    """Unit-rate +-1 jumps: nu = (delta_1 + delta_{-1})/2."""
    return two_point_measure(1.0, 1.0)


def discrete_measure(jumps, weights) -> LevyMeasure:
    """Finite atomic measure sum_k weights[k] * delta_{jumps[k]}."""
    jumps = np.asarray(jumps, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if jumps.shape != weights.shape or jumps.ndim != 1 or jumps.size == 0:
        raise NoiseError("jumps and weights must be matching 1d arrays")
    if np.any(jumps == 0.0) or not np.all(np.isfinite(jumps)):
        raise NoiseError("jump sizes must be finite and nonzero")
    if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
        raise NoiseError("weights must be finite and positive")
    if np.unique(jumps).size != jumps.size:
        raise NoiseError("jump sizes must be distinct")
    mass = float(np.sum(weights))
    return LevyMeasure("discrete", (tuple(jumps), tuple(weights)),
                       total_mass=mass,
                       second_moment=float(np.sum(weights * jumps ** 2)),
                       first_moment=float(np.sum(weights * jumps)))


def gaussian_measure(intensity: float, mean: float = 0.0,
                     std: float = 1.0) -> LevyMeasure:
    """Density intensity * N(mean, std^2); moments by adaptive quadrature."""
    if intensity < 0 or not math.isfinite(intensity):
        raise NoiseError(f"intensity must be finite nonnegative, got {intensity}")
    if std <= 0 or not math.isfinite(std):
        raise NoiseError(f"std must be finite positive, got {std}")

    def dens(z):
        return intensity * math.exp(-0.5 * ((z - mean) / std) ** 2) \
            / (std * math.sqrt(2.0 * math.pi))

    mass = integrate.quad(dens, -np.inf, np.inf, epsrel=_QUAD_RTOL)[0]
    v = integrate.quad(lambda z: z * z * dens(z), -np.inf, np.inf,
                       epsrel=_QUAD_RTOL)[0]
    if mean == 0.0:
        m1 = 0.0  # odd integrand, exactly zero by symmetry
    else:
        m1 = integrate.quad(lambda z: z * dens(z), -np.inf, np.inf,
                            epsrel=_QUAD_RTOL)[0]
    return LevyMeasure("gaussian", (intensity, mean, std), mass, v, m1)


def truncated_power_law_measure(exponent: float, cutoff: float, z_max: float,
                                scale: float = 1.0) -> LevyMeasure:
    """Symmetric density scale * |z|^(-1-exponent) on cutoff <= |z| <= z_max.

    The small-jump truncation at `cutoff` is what keeps the activity finite;
    exponent > 0 and 0 < cutoff < z_max < inf are required.
    """
    if exponent <= 0 or not math.isfinite(exponent):
        raise NoiseError(f"exponent must be positive, got {exponent}")
    if not (0 < cutoff < z_max) or not math.isfinite(z_max):
        raise NoiseError("need 0 < cutoff < z_max < inf for a finite measure")
    if scale <= 0 or not math.isfinite(scale):
        raise NoiseError(f"scale must be finite positive, got {scale}")
    mass = 2.0 * scale * integrate.quad(
        lambda z: z ** (-1.0 - exponent), cutoff, z_max, epsrel=_QUAD_RTOL)[0]
    v = 2.0 * scale * integrate.quad(
        lambda z: z ** (1.0 - exponent), cutoff, z_max, epsrel=_QUAD_RTOL)[0]
    return LevyMeasure("power_law", (exponent, cutoff, z_max, scale),
                       mass, v, 0.0)


def atomic_decomposition(measure: LevyMeasure, n_quad: int = 64):
    """(jumps, weights) with sum_k w_k f(z_k) ~= int f dnu.

    Exact for atomic kinds.  Density kinds are reduced to Gauss-Legendre
    nodes/weights on their support (n_quad points per sign).
    """
    if measure.kind == "two_point":
        jump, mass = measure.params
        return (np.array([jump, -jump]), np.array([mass / 2.0, mass / 2.0]))
    if measure.kind == "discrete":
        jumps, weights = measure.params
        return np.asarray(jumps, dtype=float), np.asarray(weights, dtype=float)
    if measure.kind == "gaussian":
        intensity, mean, std = measure.params
        nodes, w = np.polynomial.legendre.leggauss(2 * n_quad)
        lo, hi = mean - 10.0 * std, mean + 10.0 * std
        z = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        dens = intensity * np.exp(-0.5 * ((z - mean) / std) ** 2) \
            / (std * math.sqrt(2.0 * math.pi))
        return z, 0.5 * (hi - lo) * w * dens
    if measure.kind == "power_law":
        exponent, cutoff, z_max, scale = measure.params
        nodes, w = np.polynomial.legendre.leggauss(n_quad)
        z = 0.5 * (z_max - cutoff) * nodes + 0.5 * (z_max + cutoff)
        dens = scale * z ** (-1.0 - exponent)
        zq = np.concatenate([z, -z])
        wq = np.concatenate([0.5 * (z_max - cutoff) * w * dens] * 2)
        return zq, wq
    raise NoiseError(f"unknown measure kind {measure.kind!r}")


@dataclass(frozen=True)
class PointConfiguration:
    """One noise realization: atoms (times, positions, jumps) sorted by time.

    Atom times are pairwise distinct and interior to (0, T); jumps are
    nonzero.  Arrays are read-only.  `measure` records the generating jump
    measure so that solvers can read its compensator density directly.
    """

    times: np.ndarray
    positions: np.ndarray
    jumps: np.ndarray
    window: SpaceTimeWindow
    measure: LevyMeasure
    seed: object = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        z = np.asarray(self.jumps, dtype=float)
        if not (t.shape == x.shape == z.shape) or t.ndim != 1:
            raise NoiseError("atom arrays must be matching 1d arrays")
        if t.size:
            if np.any(np.diff(t) <= 0.0):
                raise NoiseError("atom times must be strictly increasing")
            if t[0] <= 0.0 or t[-1] >= self.window.T:
                raise NoiseError("atom times must lie strictly inside (0, T)")
            if np.any(np.abs(x) > self.window.R):
                raise NoiseError("atom positions must lie in [-R, R]")
            if np.any(z == 0.0) or not np.all(np.isfinite(z)):
                raise NoiseError("jump marks must be finite and nonzero")
        for arr, name in ((t, "times"), (x, "positions"), (z, "jumps")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_atoms(self) -> int:
        return int(self.times.size)

    @property
    def atoms(self):
        return list(zip(self.times, self.positions, self.jumps))


def _draw_jumps(measure: LevyMeasure, rng: np.random.Generator, n: int):
    if measure.kind == "two_point":
        jump, _ = measure.params
        return jump * (2.0 * (rng.random(n) < 0.5) - 1.0)
    if measure.kind == "discrete":
        jumps, weights = measure.params
        p = np.asarray(weights) / measure.total_mass
        return rng.choice(np.asarray(jumps), size=n, p=p)
    if measure.kind == "gaussian":
        _, mean, std = measure.params
        z = mean + std * rng.standard_normal(n)
        while np.any(z == 0.0):  # measure lives on R \ {0}
            bad = z == 0.0
            z[bad] = mean + std * rng.standard_normal(int(bad.sum()))
        return z
    if measure.kind == "power_law":
        exponent, cutoff, z_max, _ = measure.params
        u = rng.random(n)
        a = exponent
        mag = (cutoff ** -a - u * (cutoff ** -a - z_max ** -a)) ** (-1.0 / a)
        sign = 2.0 * (rng.random(n) < 0.5) - 1.0
        return sign * mag
    raise NoiseError(f"unknown measure kind {measure.kind!r}")


def sample_prm(measure: LevyMeasure, window: SpaceTimeWindow,
               seed) -> PointConfiguration:
    """Sample one Poisson random measure realization on the window.

    Atom count ~ Poisson(total_mass * |window|); times and positions uniform;
    jump sizes i.i.d. from the normalized measure.  Deterministic given
    `seed` (an int, or a (master, index) pair for a derived stream).
    Ties and boundary times have probability zero but are re-drawn anyway so
    the strict-ordering invariant holds exactly.
    """
    rng = _as_rng(seed)
    n = int(rng.poisson(measure.total_mass * window.volume))
    times = rng.uniform(0.0, window.T, size=n)
    for _ in range(64):
        bad = (times <= 0.0) | (times >= window.T)
        uniq, counts = np.unique(times, return_counts=True)
        if not bad.any() and (counts <= 1).all():
            break
        dup_vals = uniq[counts > 1]
        redraw = bad | np.isin(times, dup_vals)
        times[redraw] = rng.uniform(0.0, window.T, size=int(redraw.sum()))
    positions = rng.uniform(-window.R, window.R, size=n)
    jumps = _draw_jumps(measure, rng, n)
    order = np.argsort(times, kind="stable")
    label = seed if isinstance(seed, (int, tuple)) else None
    return PointConfiguration(times[order], positions[order], jumps[order],
                              window, measure, label)


def add_atom(config: PointConfiguration, time: float, x: float,
             jump: float) -> PointConfiguration:
    """New configuration with one extra atom, inserted in time order.

    Raises on a time collision with an existing atom (the caller perturbs)
    and on out-of-window coordinates or a zero jump.
    """
    if not (0.0 < time < config.window.T):
        raise NoiseError(f"atom time {time} outside (0, {config.window.T})")
    if abs(x) > config.window.R:
        raise NoiseError(f"atom position {x} outside [-R, R]")
    if jump == 0.0 or not math.isfinite(jump):
        raise NoiseError("jump mark must be finite and nonzero")
    if np.any(config.times == time):
        raise NoiseError(f"atom time {time} collides with an existing atom")
    k = int(np.searchsorted(config.times, time))
    return replace(config,
                   times=np.insert(config.times, k, time),
                   positions=np.insert(config.positions, k, x),
                   jumps=np.insert(config.jumps, k, jump))


def remove_atom(config: PointConfiguration, index: int) -> PointConfiguration:
    if not 0 <= index < config.n_atoms:
        raise NoiseError(f"atom index {index} out of range")
    return replace(config,
                   times=np.delete(config.times, index),
                   positions=np.delete(config.positions, index),
                   jumps=np.delete(config.jumps, index))


def save_configuration(config: PointConfiguration, path) -> Path:
    """Write atoms as CSV (t,x,z; 17 significant digits) plus a JSON sidecar
    with the window, measure, and seed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("t,x,z\n")
        for t, x, z in config.atoms:
            fh.write(f"{t:.17g},{x:.17g},{z:.17g}\n")
    meta = {"window": {"T": config.window.T, "R": config.window.R},
            "measure": config.measure.describe(),
            "seed": list(config.seed) if isinstance(config.seed, tuple)
                    else config.seed}
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=1) + "\n")
    return sidecar


def _measure_from_description(desc: dict) -> LevyMeasure:
    kind, params = desc["kind"], desc["params"]
    if kind == "two_point":
        return two_point_measure(*params)
    if kind == "discrete":
        return discrete_measure(*params)
    if kind == "gaussian":
        return gaussian_measure(*params)
    if kind == "power_law":
        return truncated_power_law_measure(*params)
    raise NoiseError(f"unknown measure kind {kind!r}")


def load_configuration(path) -> PointConfiguration:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    rows = [line.split(",") for line in
            path.read_text().strip().splitlines()[1:] if line]
    data = np.array([[float(c) for c in row] for row in rows],
                    dtype=float).reshape(-1, 3)
    window = SpaceTimeWindow(**meta["window"])
    measure = _measure_from_description(meta["measure"])
    seed = meta.get("seed")
    if isinstance(seed, list):
        seed = tuple(seed)
    return PointConfiguration(data[:, 0], data[:, 1], data[:, 2],
                              window, measure, seed)
