"""Spectrally decomposed semilinear problems u_t + Au = F(u).

A is diagonal in the chosen eigenbasis, so a state is just its coefficient
vector. All functions accept a single state of shape (M,) or a batch of
shape (B, M); batches are evaluated row by row with identical arithmetic.
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.fft import dst

from app.core.exceptions import (
    DimensionMismatchError, InvalidProblemError, InvalidArgumentError
)
from app.models import (
    CouplingMap, EigenvalueRule, NonlinearityKind, NonlinearitySpec, ProblemPreset
)

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.25


def cutoff(s, inner: float):
    """C1 cubic smoothstep: 1 for s <= inner, 0 for s >= 1."""
    w = np.clip((np.asarray(s, dtype=float) - inner) / (1.0 - inner), 0.0, 1.0)
    return 1.0 - 3.0 * w ** 2 + 2.0 * w ** 3


def cutoff_slope_max(inner: float) -> float:
    return 1.5 / (1.0 - inner)


def norms(u: np.ndarray) -> np.ndarray:
    # Same reduction for single states and batches so results never depend on batching
    return np.sqrt(np.sum(u * u, axis=-1))


@dataclass(frozen=True, eq=False)
class SpectralProblem:
    eigenvalues: np.ndarray
    split_index: int
    nonlinearity: NonlinearitySpec
    k0: float
    k1: float
    r_trunc: float
    name: str = "custom"

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        self._validate()

    def _validate(self):
        lam = self.eigenvalues
        if lam.ndim != 1 or lam.size < 2:
            raise InvalidProblemError("need at least two eigenvalues", size=int(lam.size))
        if not np.all(np.isfinite(lam)) or lam[0] <= 0:
            raise InvalidProblemError("eigenvalues must be finite with lambda1 > 0")
        if np.any(np.diff(lam) < 0):
            raise InvalidProblemError("eigenvalues must be nondecreasing")
        if not 1 <= self.split_index < lam.size:
            raise InvalidProblemError(
                "split index out of range", split_index=self.split_index, modes=int(lam.size)
            )
        if self.k0 < 0 or self.k1 < 0 or not np.isfinite([self.k0, self.k1]).all():
            raise InvalidProblemError("k0 and k1 must be finite and nonnegative", k0=self.k0, k1=self.k1)
        if self.k1 >= self.lambda_n1:
            raise InvalidProblemError(
                "k1 must be smaller than lambda_{N+1}", k1=self.k1, lambda_n1=self.lambda_n1
            )
        if not self.r_trunc > self.k0 / self.lambda1:
            raise InvalidProblemError(
                "r_trunc must exceed k0/lambda1", r_trunc=self.r_trunc, bound=self.k0 / self.lambda1
            )
        spec = self.nonlinearity
        if spec.kind == NonlinearityKind.CONSTANT_FORCING and len(spec.forcing) != lam.size:
            raise InvalidProblemError(
                "forcing vector length differs from mode count", forcing=len(spec.forcing), modes=int(lam.size)
            )

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def p_dim(self) -> int:
        return self.split_index

    @property
    def q_dim(self) -> int:
        return self.dim - self.split_index

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_n(self) -> float:
        return float(self.eigenvalues[self.split_index - 1])

    @property
    def lambda_n1(self) -> float:
        return float(self.eigenvalues[self.split_index])

    @property
    def p_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[:self.split_index]

    @property
    def q_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.split_index:]

    @property
    def flags(self) -> Tuple[str, ...]:
        flags = []
        if self.eigenvalues[0] == self.eigenvalues[1]:
            flags.append("lambda1_repeated")
        if not self.lambda_n1 - self.lambda_n > 2 * self.k1:
            flags.append("no_classical_spectral_gap")
        return tuple(flags)


def as_state(problem: SpectralProblem, u, what: str = "state") -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != problem.dim:
        raise DimensionMismatchError(what, problem.dim, list(arr.shape))
    return arr


def split(problem: SpectralProblem, u) -> Tuple[np.ndarray, np.ndarray]:
    """Orthogonal P/Q split; both parts keep the full length."""
    u = as_state(problem, u)
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    p[..., :problem.split_index] = u[..., :problem.split_index]
    q[..., problem.split_index:] = u[..., problem.split_index:]
    return p, q


def join(problem: SpectralProblem, p_coords, q_coords) -> np.ndarray:
    """Assemble full states from N-coordinates and (M-N)-coordinates."""
    p_coords = np.asarray(p_coords, dtype=float)
    q_coords = np.asarray(q_coords, dtype=float)
    if p_coords.shape[-1] != problem.p_dim:
        raise DimensionMismatchError("p coordinates", problem.p_dim, list(p_coords.shape))
    if q_coords.shape[-1] != problem.q_dim:
        raise DimensionMismatchError("q coordinates", problem.q_dim, list(q_coords.shape))
    return np.concatenate([p_coords, q_coords], axis=-1)


def linear_preimage(problem: SpectralProblem, p, t: float) -> np.ndarray:
    """e^{A_P t} p, the exact preimage when the P-dynamics are linear."""
    return np.asarray(p, dtype=float) * np.exp(problem.p_eigenvalues * t)


# Sine basis on (0, pi): phi_k(x) = sqrt(2/pi) sin(kx), collocation x_j = pi j / J
@lru_cache(maxsize=None)
def collocation_size(modes: int) -> int:
    return 4 * modes + 1


def to_physical(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    padded = np.zeros(coeffs.shape[:-1] + (n_points,))
    padded[..., :coeffs.shape[-1]] = coeffs
    return dst(padded, type=1, axis=-1) * (0.5 * np.sqrt(2.0 / np.pi))


def to_modes(values: np.ndarray, modes: int) -> np.ndarray:
    J = values.shape[-1] + 1
    coeffs = dst(values, type=1, axis=-1) * (0.5 * np.sqrt(2.0 / np.pi) * np.pi / J)
    return coeffs[..., :modes]


def collocation_points(modes: int) -> np.ndarray:
    J = collocation_size(modes)
    return np.pi * np.arange(1, J) / J


def _coupling(spec: NonlinearitySpec, p: np.ndarray) -> np.ndarray:
    """Named P -> first-Q-coordinate maps, cut off at coupling_radius in |p|."""
    p_norm = norms(p)
    if spec.coupling == CouplingMap.QUADRATIC:
        value = spec.coupling_gain * p_norm ** 2
    else:
        value = spec.coupling_gain * np.sin(p[..., 0])
    weight = np.where(p_norm >= spec.coupling_radius, 0.0, cutoff(p_norm / spec.coupling_radius, spec.cutoff_inner))
    return weight * value


def raw_nonlinearity(problem: SpectralProblem, u: np.ndarray) -> np.ndarray:
    """G(u) before the outer cutoff."""
    spec = problem.nonlinearity
    if spec.kind == NonlinearityKind.ZERO:
        return np.zeros_like(u)
    if spec.kind == NonlinearityKind.CONSTANT_FORCING:
        return np.broadcast_to(np.asarray(spec.forcing, dtype=float), u.shape).copy()
    if spec.kind == NonlinearityKind.DECOUPLED:
        out = np.zeros_like(u)
        out[..., problem.split_index] = _coupling(spec, u[..., :problem.split_index])
        return out
    # Chafee-Infante reaction term u - u^3, pseudospectral
    n_points = collocation_size(problem.dim) - 1
    values = to_physical(u, n_points)
    return to_modes(values - values ** 3, problem.dim)


def eval_nonlinearity(problem: SpectralProblem, u) -> np.ndarray:
    """F(u) = theta(|u|/R) G(u); exactly zero for |u| >= R.

    G is evaluated on the rows inside the ball only, so far rows of a mixed
    batch never reach the cubic term.
    """
    u = as_state(problem, u)
    if problem.nonlinearity.kind == NonlinearityKind.ZERO:
        return np.zeros_like(u)
    rows = u.reshape(-1, u.shape[-1])
    out = np.zeros_like(rows)
    size = norms(rows)
    inside = size < problem.r_trunc
    if inside.any():
        weight = cutoff(size[inside] / problem.r_trunc, problem.nonlinearity.cutoff_inner)
        out[inside] = weight[:, None] * raw_nonlinearity(problem, rows[inside])
    return out.reshape(u.shape)


def sample_ball(rng: np.random.Generator, count: int, dim: int, radius: float,
                radial: str = "volume") -> np.ndarray:
    """Random points in the ball |x| <= radius.

    ``radial="volume"`` samples uniformly by volume, ``"uniform"`` draws the
    radius uniformly so small norms are as likely as large ones.
    """
    directions = rng.standard_normal((count, dim))
    directions /= norms(directions)[:, None]
    u = rng.uniform(0.0, 1.0, count)
    scale = u ** (1.0 / dim) if radial == "volume" else u
    return directions * (radius * scale)[:, None]


def estimate_constants(problem: SpectralProblem, n_samples: int, seed: int) -> Tuple[float, float]:
    """Certified (k0, k1) by seeded sampling, inflated by SAFETY_FACTOR."""
    if n_samples < 2:
        raise InvalidArgumentError("n_samples must be at least 2", {"n_samples": n_samples})

    spec = problem.nonlinearity
    if spec.kind == NonlinearityKind.ZERO:
        return 0.0, 0.0
    if spec.kind == NonlinearityKind.CONSTANT_FORCING:
        size = float(np.linalg.norm(spec.forcing))
        return size, size * cutoff_slope_max(spec.cutoff_inner) / problem.r_trunc

    rng = np.random.default_rng(seed)
    u = sample_ball(rng, n_samples, problem.dim, problem.r_trunc, radial="uniform")
    f_u = eval_nonlinearity(problem, u)
    k0 = float(np.max(norms(f_u)))

    directions = rng.standard_normal((n_samples, problem.dim))
    directions /= norms(directions)[:, None]
    steps = problem.r_trunc * 10.0 ** rng.uniform(-3.0, -1.0, n_samples)
    v = u + directions * steps[:, None]
    quotients = norms(f_u - eval_nonlinearity(problem, v)) / norms(u - v)
    k1 = float(np.max(quotients))

    logger.debug("Sampled nonlinearity constants", extra={"preset": problem.name, "n_points": n_samples})
    return SAFETY_FACTOR * k0, SAFETY_FACTOR * k1


def preset_eigenvalues(preset: ProblemPreset) -> np.ndarray:
    if preset.eigenvalue_rule == EigenvalueRule.EXPLICIT:
        return np.asarray(preset.eigenvalues, dtype=float)
    nu = preset.nonlinearity.nu if preset.nonlinearity.kind == NonlinearityKind.CHAFEE_INFANTE else preset.nu
    k = np.arange(1, preset.modes + 1, dtype=float)
    return nu * k ** 2


def raw_bound(spec: NonlinearitySpec) -> Optional[float]:
    """Analytic bound of the raw nonlinearity on its natural support; None if unbounded."""
    if spec.kind == NonlinearityKind.ZERO:
        return 0.0
    if spec.kind == NonlinearityKind.CONSTANT_FORCING:
        return float(np.linalg.norm(spec.forcing))
    if spec.kind == NonlinearityKind.DECOUPLED:
        if spec.coupling == CouplingMap.QUADRATIC:
            return spec.coupling_gain * spec.coupling_radius ** 2
        return spec.coupling_gain
    return None


def truncation_radius(preset: ProblemPreset, eigenvalues: np.ndarray) -> float:
    """R = 2 max(k0_raw/lambda1, attractor-ball estimate)."""
    if preset.r_trunc is not None:
        return preset.r_trunc
    spec = preset.nonlinearity
    k0_raw = raw_bound(spec) or 0.0
    ball = preset.attractor_radius
    if spec.kind == NonlinearityKind.DECOUPLED:
        # keeps the outer cutoff inactive wherever the coupling is nonzero
        lambda_n1 = float(eigenvalues[preset.split])
        ball = max(ball, (spec.coupling_radius + k0_raw / lambda_n1) / spec.cutoff_inner)
    return 2.0 * max(k0_raw / float(eigenvalues[0]), ball)


def build_problem(preset: ProblemPreset) -> SpectralProblem:
    eigenvalues = preset_eigenvalues(preset)
    provisional = SpectralProblem(
        eigenvalues=eigenvalues,
        split_index=preset.split,
        nonlinearity=preset.nonlinearity,
        k0=0.0,
        k1=0.0,
        r_trunc=truncation_radius(preset, eigenvalues),
        name=preset.name,
    )
    k0, k1 = preset.k0, preset.k1
    if k0 is None or k1 is None:
        k0_est, k1_est = estimate_constants(provisional, preset.constants_samples, preset.constants_seed)
        k0 = k0_est if k0 is None else k0
        k1 = k1_est if k1 is None else k1
    problem = replace(provisional, k0=float(k0), k1=float(k1))
    if "lambda1_repeated" in problem.flags:
        logger.warning("lambda1 equals lambda2", extra={"preset": preset.name})
    return problem
