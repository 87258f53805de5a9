from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Any, Tuple
from enum import Enum


class NonlinearityKind(str, Enum):
    ZERO = "zero"
    CONSTANT_FORCING = "constant_forcing"
    DECOUPLED = "decoupled"
    CHAFEE_INFANTE = "chafee_infante"


class CouplingMap(str, Enum):
    QUADRATIC = "quadratic"
    SINE = "sine"


class EigenvalueRule(str, Enum):
    LAPLACIAN = "laplacian"
    EXPLICIT = "explicit"


class SectionMode(str, Enum):
    EVOLVED = "evolved"
    GRAPH = "graph"


class ExperimentKind(str, Enum):
    RATES = "rates"
    PHI = "phi"
    INCLUSION = "inclusion"
    ATTRACTOR = "attractor"
    LEMMA31 = "lemma31"
    ALL = "all"


# Problem definition
class NonlinearitySpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: NonlinearityKind
    forcing: Optional[Tuple[float, ...]] = None
    coupling: Optional[CouplingMap] = None
    coupling_gain: float = Field(default=1.0, gt=0)
    coupling_radius: float = Field(default=1.0, gt=0)
    nu: Optional[float] = Field(default=None, gt=0)
    cutoff_inner: float = Field(default=0.5, gt=0, lt=1)

    @model_validator(mode="after")
    def check_kind_parameters(self):
        """Each kind carries exactly the parameters it needs"""
        if self.kind == NonlinearityKind.CONSTANT_FORCING and not self.forcing:
            raise ValueError("constant_forcing needs a forcing vector")
        if self.kind == NonlinearityKind.DECOUPLED and self.coupling is None:
            raise ValueError("decoupled needs a named coupling map")
        if self.kind == NonlinearityKind.CHAFEE_INFANTE and self.nu is None:
            raise ValueError("chafee_infante needs nu")
        return self


class ProblemPreset(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    description: str = ""
    modes: int = Field(..., ge=2)
    split: int = Field(..., ge=1)
    eigenvalue_rule: EigenvalueRule = EigenvalueRule.LAPLACIAN
    nu: float = Field(default=1.0, gt=0)
    eigenvalues: Optional[Tuple[float, ...]] = None
    nonlinearity: NonlinearitySpec
    attractor_radius: float = Field(default=1.0, gt=0)
    # Pinned constants; computed by the certified sampler when absent
    k0: Optional[float] = Field(default=None, ge=0)
    k1: Optional[float] = Field(default=None, ge=0)
    r_trunc: Optional[float] = Field(default=None, gt=0)
    constants_samples: int = Field(default=2000, ge=2)
    constants_seed: int = 0

    @model_validator(mode="after")
    def check_layout(self):
        if self.split >= self.modes:
            raise ValueError("split must be smaller than modes")
        if self.eigenvalue_rule == EigenvalueRule.EXPLICIT:
            if self.eigenvalues is None or len(self.eigenvalues) != self.modes:
                raise ValueError("explicit eigenvalues must list one value per mode")
        if (self.nonlinearity.kind == NonlinearityKind.CHAFEE_INFANTE
                and self.eigenvalue_rule != EigenvalueRule.LAPLACIAN):
            raise ValueError("chafee_infante uses the laplacian eigenvalue rule")
        if (self.nonlinearity.kind == NonlinearityKind.CONSTANT_FORCING
                and len(self.nonlinearity.forcing) != self.modes):
            raise ValueError("forcing vector must have one entry per mode")
        return self


# Experiment configuration
class NumericsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    h: float = Field(default=1e-3, gt=0)
    # forward
    n_max: int = Field(default=6, ge=2)
    grid_resolution: int = Field(default=33, ge=4)
    section_mode: SectionMode = SectionMode.EVOLVED
    manifold_tol: float = Field(default=1e-10, gt=0)
    noise_floor: float = Field(default=1e-13, ge=0)
    rate_slack: float = Field(default=3.0, ge=1)
    # backward
    phi_grid_resolution: int = Field(default=9, ge=4)
    phi_n_max: int = Field(default=6, ge=2)
    n_starts: int = Field(default=8, ge=1)
    phi_tol: float = Field(default=1e-8, gt=0)
    shooting_tol: float = Field(default=1e-10, gt=0)
    phi_samples: int = Field(default=10, ge=1)
    # analysis
    n_probes: int = Field(default=8, ge=0)
    attractor_seeds: int = Field(default=64, ge=1)
    t_transient: float = Field(default=20.0, gt=0)
    t_collect: float = Field(default=5.0, ge=0)
    stride: float = Field(default=0.5, gt=0)
    invariance_time: float = Field(default=0.5, gt=0)
    # trajectory-pair estimates
    pair_count: int = Field(default=100, ge=1)
    pair_radius: Optional[float] = Field(default=None, gt=0)
    t0: float = Field(default=0.0, ge=0)
    t1: float = Field(default=2.0, gt=0)

    @model_validator(mode="after")
    def check_window(self):
        if self.t1 <= self.t0:
            raise ValueError("t1 must be larger than t0")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    preset: str = Field(..., min_length=1)
    overrides: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    output_dir: str = "runs/default"

    @field_validator("preset")
    def normalize_preset(cls, v):
        return v.strip()


class GridMeta(BaseModel):
    """How a sampled manifold's p-grid was generated"""
    bounds: List[Tuple[float, float]]
    resolution: List[int]
    h: Optional[float] = None

    @property
    def cell_diagonal(self) -> float:
        widths = [(hi - lo) / (res - 1) for (lo, hi), res in zip(self.bounds, self.resolution)]
        return float(sum(w * w for w in widths) ** 0.5)


# Reports
class RateConstants(BaseModel):
    lambda1: float
    lambdaN: float
    lambdaN1: float
    k0: float
    k1: float
    alpha: float
    beta: float
    k2: float
    k3: Optional[float] = None
    k4: Optional[float] = None
    k5: Optional[float] = None
    rate: float
    gap_delta: float
    rate_positive: bool
    k3_denominator_valid: bool
    spectral_gap_condition: bool
    lambda1_repeated: bool = False


class RateReport(BaseModel):
    indices: List[int]
    distances: List[float]
    fitted_rate: Optional[float] = None
    fit_indices: List[int] = Field(default_factory=list)
    theoretical_rate: float
    prefactor: float
    converged: bool
    slack_band: Tuple[float, float] = (0.5, 2.0)
    rate_within_band: Optional[bool] = None
    bound_slack: float = 3.0
    bound_violations: List[int] = Field(default_factory=list)
    # (m, n) index pairs with m < n whose distance exceeds the bound at m
    pair_violations: List[Tuple[int, int]] = Field(default_factory=list)
    floored_indices: List[int] = Field(default_factory=list)
    # distances at or below this are treated as solver noise
    noise_floor: float = 0.0
    nonincreasing: bool = True
    n_star: Optional[int] = None


class LipschitzReport(BaseModel):
    value: float
    fold_pairs: int = 0
    degenerate: bool = False


class CheckResult(BaseModel):
    name: str
    passed: bool
    required: bool = True
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: Dict[str, Any] = Field(default_factory=dict)


class BoundCheck(BaseModel):
    name: str
    bound: float
    measured: float
    margin: float
    passed: bool


class BackwardBoundsReport(BaseModel):
    horizon: int
    checks: List[BoundCheck]
    passed: bool
    half_power_ratio: Optional[float] = None


class InequalityCheck(BaseModel):
    name: str
    max_violation: float
    min_slack: float
    passed: bool
    skipped: bool = False


class SigmaRhoReport(BaseModel):
    t0: float
    t: float
    checks: List[InequalityCheck]
    passed: bool
    skipped_reason: Optional[str] = None


class ContainmentReport(BaseModel):
    n_points: int
    max_distance: float
    worst_index: int
    worst_point: List[float]
    tol: float
    passed: bool


class InclusionReport(BaseModel):
    forward_distance: float
    reverse_distance: float
    tol: float
    passed: bool
    reverse_passed: bool
    single_valued: bool
    equality_expected: bool


class ProbeEntry(BaseModel):
    p: List[float]
    q: List[float]
    interpolated: List[float]
    jump: float
    local_lipschitz: float
    flagged: bool
    multi_branch: bool
    converged: bool


class ClosednessReport(BaseModel):
    probes: List[ProbeEntry]
    modulus: float
    flagged_sites: int
    consistent: bool
    passed: bool


class SupportReport(BaseModel):
    n_exterior: int
    max_exterior_q: float
    tol: float
    passed: bool


class InvarianceReport(BaseModel):
    n_points: int
    max_distance: float
    tol: float
    passed: bool


class ExperimentReport(BaseModel):
    experiment: ExperimentKind
    preset: str
    problem_hash: str
    config: ExperimentConfig
    constants: RateConstants
    checks: List[CheckResult]
    passed: bool
    artifacts: List[str] = Field(default_factory=list)
    sections: Dict[str, Any] = Field(default_factory=dict)
