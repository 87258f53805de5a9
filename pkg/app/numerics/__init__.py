# Numerical core: spectral problems, the truncated flow and both manifold constructions
from app.numerics.problem import SpectralProblem, build_problem, estimate_constants
from app.numerics.flow import Trajectory, flow_map, flow_map_batch, integrate
from app.numerics.estimates import rate_constants, verify_sigma_rho
from app.numerics.metrics import build_rate_report, cauchy_rate, directed_hausdorff, hausdorff
from app.numerics.manifold import SampledManifold
from app.numerics.backward import (
    PhiValue, ShootingResult, check_backward_bounds, phi, phi_batch, phi_graph, shoot, shoot_batch
)
from app.numerics.forward import (
    flat_manifold_for, graph_solver_noise, graph_step, lipschitz_estimate, manifold_limit, manifold_sequence,
    sample_flat_manifold
)
from app.numerics.analysis import (
    closedness_probe, containment, inclusion_check, invariance_check, sample_attractor, support_check
)

__all__ = [
    "SpectralProblem",
    "build_problem",
    "estimate_constants",
    "Trajectory",
    "flow_map",
    "flow_map_batch",
    "integrate",
    "rate_constants",
    "verify_sigma_rho",
    "build_rate_report",
    "cauchy_rate",
    "directed_hausdorff",
    "hausdorff",
    "SampledManifold",
    "PhiValue",
    "ShootingResult",
    "check_backward_bounds",
    "phi",
    "phi_batch",
    "phi_graph",
    "shoot",
    "shoot_batch",
    "flat_manifold_for",
    "graph_solver_noise",
    "graph_step",
    "lipschitz_estimate",
    "manifold_limit",
    "manifold_sequence",
    "sample_flat_manifold",
    "closedness_probe",
    "containment",
    "inclusion_check",
    "invariance_check",
    "sample_attractor",
    "support_check",
]
