"""Cost trajectories from a linear state-space model with a nonlinear observer.

State:        x_{k+1} = A x_k + w_k,          w_k ~ N(0, Q)
Observation:  y_k     = ((H x_k)**deg + 0.5) * xi_k,  xi_k ~ U[1 - xib, 1 + xib]

``**deg`` is elementwise and ``xi_k`` is one scalar per step multiplying the
whole vector.

Random numbers come from a single ``numpy.random.Generator(PCG64)`` uniform
stream. Gaussians are produced from it by the Box-Muller transform
``sqrt(-2 ln(1-u1)) * cos(2 pi u2)`` / ``sin(2 pi u2)`` instead of the
generator's ziggurat sampler, so a trajectory depends only on the uniform
stream and the documented transform.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemSpec",
    "CostTrajectory",
    "DynsysError",
    "SimulationOverflowError",
    "MixingUndefinedError",
    "simulate",
    "spectral_radius",
    "spectral_norm",
    "mixing_proxy",
    "benchmark_system",
    "derive_seed",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


class DynsysError(ValueError):
    pass


class SimulationOverflowError(DynsysError, OverflowError):
    pass


class MixingUndefinedError(DynsysError):
    pass


def _matrix(a, name: str, d: int | None = None) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DynsysError(f"{name} must be square, got shape {m.shape}")
    if d is not None and m.shape[0] != d:
        raise DynsysError(f"{name} must be {d}x{d}")
    if not np.all(np.isfinite(m)):
        raise DynsysError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class SystemSpec:
    A: np.ndarray
    Q: np.ndarray
    H: np.ndarray | None = None
    deg: int = 2
    xi_halfwidth: float = 0.25
    x0: np.ndarray | None = None
    burn_in: int = 200
    allow_unstable: bool = False

    def __post_init__(self):
        A = _matrix(self.A, "A")
        d = A.shape[0]
        Q = _matrix(self.Q, "Q", d)
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise DynsysError("Q must be symmetric")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.linalg.eigvalsh(Q).min() < -1e-10 * scale:
            raise DynsysError("Q must be positive semidefinite")
        H = np.eye(d) if self.H is None else _matrix(self.H, "H", d)
        x0 = np.zeros(d) if self.x0 is None else np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (d,):
            raise DynsysError(f"x0 must have length {d}")
        if int(self.deg) != self.deg or self.deg < 1:
            raise DynsysError("deg must be a positive integer")
        if not 0.0 <= float(self.xi_halfwidth) < 1.0:
            raise DynsysError("xi_halfwidth must lie in [0, 1)")
        if int(self.burn_in) != self.burn_in or self.burn_in < 0:
            raise DynsysError("burn_in must be a nonnegative integer")
        x0.setflags(write=False)
        for k, v in dict(A=A, Q=Q, H=H, x0=x0, deg=int(self.deg),
                         xi_halfwidth=float(self.xi_halfwidth), burn_in=int(self.burn_in),
                         allow_unstable=bool(self.allow_unstable)).items():
            object.__setattr__(self, k, v)

    @property
    def dim(self) -> int:
        return int(self.A.shape[0])

    def replace(self, **changes) -> "SystemSpec":
        d = self.to_dict()
        d.update(changes)
        return SystemSpec.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "Q": self.Q.tolist(), "H": self.H.tolist(),
            "deg": self.deg, "xi_halfwidth": self.xi_halfwidth, "x0": self.x0.tolist(),
            "burn_in": self.burn_in, "allow_unstable": self.allow_unstable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        known = {"A", "Q", "H", "deg", "xi_halfwidth", "x0", "burn_in", "allow_unstable"}
        extra = set(d) - known
        if extra:
            raise DynsysError(f"unknown system fields: {sorted(extra)}")
        return cls(**d)


def benchmark_system(deg: int = 2, a12: float = 0.5, **kw) -> SystemSpec:
    """The 2-D benchmark system ``A = [[0.8, a12], [0, 0.8]]``, ``Q = 0.1 I``."""
    return SystemSpec(A=[[0.8, a12], [0.0, 0.8]], Q=0.1 * np.eye(2), deg=deg, **kw)


@dataclass(frozen=True, eq=False)
class CostTrajectory:
    data: np.ndarray
    spec: SystemSpec | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.data)

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic child seed for work item ``index``."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0])


def _box_muller(u: np.ndarray, count: int) -> np.ndarray:
    half = (count + 1) // 2
    u1, u2 = u[:half], u[half:2 * half]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:count]


def _psd_factor(Q: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(Q)
    return V * np.sqrt(np.clip(lam, 0.0, None))


def simulate(spec: SystemSpec, n: int, seed: int) -> CostTrajectory:
    """Simulate ``n`` observations after discarding ``spec.burn_in`` steps."""
    if n < 1:
        raise DynsysError("n must be positive")
    rho = spectral_radius(spec.A)
    if rho >= 1.0:
        if not spec.allow_unstable:
            raise DynsysError(f"spectral radius {rho:.6g} >= 1; set allow_unstable to simulate anyway")
        warnings.warn(f"simulating a system with spectral radius {rho:.6g} >= 1", RuntimeWarning)

    d = spec.dim
    total = spec.burn_in + n
    rng = np.random.Generator(np.random.PCG64(seed))
    n_gauss = total * d
    u = rng.random(2 * ((n_gauss + 1) // 2))
    noise = (_box_muller(u, n_gauss).reshape(total, d)) @ _psd_factor(spec.Q).T
    lo = 1.0 - spec.xi_halfwidth
    xi = lo + 2.0 * spec.xi_halfwidth * rng.random(total)

    states = np.empty((total, d))
    x = spec.x0.copy()
    A = spec.A
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(total):
            states[k] = x
            x = A @ x + noise[k]
        obs = ((states @ spec.H.T) ** spec.deg + 0.5) * xi[:, None]
    bad = ~np.all(np.isfinite(obs), axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise SimulationOverflowError(f"non-finite observation at step {k} (burn-in included)")
    return CostTrajectory(
        data=obs[spec.burn_in:].copy(), spec=spec, seed=seed,
        meta={"xi_halfwidth": spec.xi_halfwidth, "rho": rho},
    )


def spectral_radius(A) -> float:
    A = _matrix(A, "A")
    if A.shape == (2, 2):
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = tr * tr / 4.0 - det
        if disc >= 0:
            s = math.sqrt(disc)
            return float(max(abs(tr / 2 + s), abs(tr / 2 - s)))
        # complex pair: |lambda|^2 = det
        return float(math.sqrt(det))
    return float(np.abs(np.linalg.eigvals(A)).max())


def spectral_norm(A) -> float:
    A = _matrix(A, "A")
    return float(math.sqrt(max(np.linalg.eigvalsh(A.T @ A).max(), 0.0)))


def mixing_proxy(A, k: int, c: float = 1.0) -> float:
    """Plug-in proxy ``c * rho(A)**k`` for the beta-mixing coefficient at gap ``k``.

    This is a proxy for a stable linear system's geometric mixing rate, not an
    estimate of the true coefficient.
    """
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise MixingUndefinedError(f"spectral radius {rho:.6g} >= 1: system does not mix geometrically")
    if k < 0:
        raise DynsysError("gap k must be nonnegative")
    return float(c * rho**k)


def write_trajectory_csv(traj: CostTrajectory, path=None) -> str:
    """CSV with header ``t,y1,...,yd`` (t is 1-based). Returns the text; writes if ``path``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"y{j + 1}" for j in range(traj.dim)])
    for t, row in enumerate(traj.data, start=1):
        w.writerow([t] + [repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        from ._io import atomic_write_text

        atomic_write_text(path, text)
        sidecar = {"spec": traj.spec.to_dict() if traj.spec else None, "seed": traj.seed, "n": len(traj)}
        atomic_write_text(str(path) + ".json", json.dumps(sidecar, indent=2, sort_keys=True))
    return text


def read_trajectory_csv(path) -> CostTrajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "t":
        raise DynsysError("trajectory CSV must start with a 't' column")
    data = np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    spec = seed = None
    try:
        with open(str(path) + ".json") as fh:
            side = json.load(fh)
        spec = SystemSpec.from_dict(side["spec"]) if side.get("spec") else None
        seed = side.get("seed")
    except FileNotFoundError:
        pass
    return CostTrajectory(data=data, spec=spec, seed=seed)
