"""spdelab: a desk-scale laboratory for gradient-flow SPDEs.

Grids with L2 / H1 / discrete H^-1 geometries, convex potentials with
certified proximal maps, Moreau-Yosida regularization of singular power
nonlinearities, rescaled nonlocal interaction kernels, a seeded
Monte-Carlo time-stepping engine with common-noise coupling, resolvent
convergence probes and variational-inequality audits, all wired into a
config-driven experiment CLI.
"""

from .grids import (
    DIRICHLET,
    H1,
    HMINUS1,
    L2,
    NEUMANN,
    Grid,
    GridFunction,
    VectorField,
    box_grid,
    divergence,
    gradient,
    h1_norm,
    inner,
    interval_grid,
    laplacian,
    norm,
)
from .kernels import Kernel, RescaledKernel, c_jp, k_pd, nonlocal_apply, nonlocal_energy
from .profiles import PowerProfile, ViscousProfile, YosidaPowerProfile
from .potentials import (
    FastDiffusionPotential,
    GradientPotential,
    NonlocalPotential,
    ProxDidNotConverge,
    ProxResult,
    fast_diffusion,
    general_gradient,
    nonlocal_p,
    p_dirichlet,
)
from .engine import (
    AdditiveNoise,
    LinearMultiplicativeNoise,
    NemytskiiNoise,
    SchemeParams,
    TrajectoryEnsemble,
    apply_B,
    hs_norm_sq,
    simulate,
    simulate_coupled,
    step,
)
from .mosco import MoscoReport, condition_n_check, h1_resolvent_bound_check, mosco_trend, resolvent_distance
from .svi import (
    SVIReport,
    SolutionTestProcess,
    TestProcess,
    check_energy,
    check_variational,
    default_constant,
    weak_convergence_metric,
)

__version__ = "0.1.0"
