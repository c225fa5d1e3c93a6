"""Time integration of gradient-flow SPDEs with truncated multi-mode noise.

The state obeys ``dX in -grad E(X) dt + B(X) dW`` with E one of the convex
potentials and W realized as K independent Brownian modes.  The default
scheme is semi-implicit Euler-Maruyama: noise enters explicitly, the drift
is applied through the proximal map,

    X_{n+1} = prox_{dt E}( X_n + B(X_n) dW_n ),

which is unconditionally stable and dissipates the energy exactly along
noise-free paths.  An explicit mode using the Lipschitz Yosida drift is
available behind ``drift="explicit_yosida"`` with the step bound
``dt <= delta / 4`` enforced.

Randomness is counter-based: every path derives its stream from
``SeedSequence((seed, path_index))`` over the Philox generator, so ensembles
are reproducible and independent of path scheduling; increments are stored
with the trajectories for coupling and auditing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, GridFunction, L2, space_norm_sq
from .potentials import Potential

__all__ = [
    "AdditiveNoise",
    "LinearMultiplicativeNoise",
    "NemytskiiNoise",
    "SchemeParams",
    "TrajectoryEnsemble",
    "gaussian_increments",
    "apply_B",
    "hs_norm_sq",
    "step",
    "simulate",
    "simulate_coupled",
]


# ---------------------------------------------------------------------------
# diffusion coefficients
# ---------------------------------------------------------------------------


class DiffusionModel:
    """K noise modes mapping a state to per-mode response fields."""

    grid: Grid
    space: str
    mode_count: int
    label: str = "noise"

    def responses(self, U: np.ndarray) -> np.ndarray:
        """Mode responses for a batch of states: (m, n) -> (m, K, n)."""
        raise NotImplementedError

    def apply_batch(self, U: np.ndarray, dW: np.ndarray) -> np.ndarray:
        """``sum_k response_k(u) dW_k`` rowwise: (m, n), (m, K) -> (m, n)."""
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        """Certificate L with ``||B(u) - B(v)||_HS <= L ||u - v||_H``."""
        raise NotImplementedError

    def hs_norm_sq_batch(self, U: np.ndarray) -> np.ndarray:
        R = self.responses(np.asarray(U, dtype=float))
        return np.sum(space_norm_sq(self.grid, R, self.space), axis=-1)


def _stack_modes(modes) -> tuple[Grid, str, np.ndarray]:
    if not modes:
        raise ValueError("need at least one noise mode")
    grid = modes[0].grid
    space = modes[0].space
    for g in modes:
        if g.grid != grid or g.space != space:
            raise ValueError("noise modes must share one grid and space tag")
    return grid, space, np.stack([g.flat for g in modes])


class AdditiveNoise(DiffusionModel):
    """State-independent modes: ``B(u) dW = sum_k g_k dW_k``; L = 0."""

    def __init__(self, modes):
        self.grid, self.space, self._modes = _stack_modes(modes)
        self.mode_count = self._modes.shape[0]
        self.label = f"additive[K={self.mode_count}]"

    def responses(self, U):
        U = np.asarray(U, dtype=float)
        return np.broadcast_to(self._modes, (U.shape[0],) + self._modes.shape)

    def apply_batch(self, U, dW):
        return np.asarray(dW, dtype=float) @ self._modes

    @property
    def lipschitz(self) -> float:
        return 0.0


class LinearMultiplicativeNoise(DiffusionModel):
    """``B(u) dW = sum_k f_k u dW_k`` (pointwise products)."""

    def __init__(self, fields):
        self.grid, self.space, self._fields = _stack_modes(fields)
        self.mode_count = self._fields.shape[0]
        self.label = f"linear_multiplicative[K={self.mode_count}]"

    def responses(self, U):
        U = np.asarray(U, dtype=float)
        return U[:, None, :] * self._fields[None, :, :]

    def apply_batch(self, U, dW):
        return np.asarray(U, dtype=float) * (np.asarray(dW, dtype=float) @ self._fields)

    @property
    def lipschitz(self) -> float:
        # per-mode sup bounds; valid verbatim in the L2 geometry
        return float(np.sqrt(np.sum(np.max(np.abs(self._fields), axis=1) ** 2)))


class NemytskiiNoise(DiffusionModel):
    """``B(u) dW = sum_k b(u) e_k dW_k`` with a scalar Lipschitz map b."""

    def __init__(self, b, lipschitz_b: float, modes):
        self.grid, self.space, self._modes = _stack_modes(modes)
        self.mode_count = self._modes.shape[0]
        self._b = b
        self._lip_b = float(lipschitz_b)
        self.label = f"nemytskii[K={self.mode_count}]"

    def responses(self, U):
        bU = self._b(np.asarray(U, dtype=float))
        return bU[:, None, :] * self._modes[None, :, :]

    def apply_batch(self, U, dW):
        return self._b(np.asarray(U, dtype=float)) * (np.asarray(dW, dtype=float) @ self._modes)

    @property
    def lipschitz(self) -> float:
        return self._lip_b * float(np.sqrt(np.sum(np.max(np.abs(self._modes), axis=1) ** 2)))


def apply_B(model: DiffusionModel, u: GridFunction, dW) -> GridFunction:
    """Single-state noise application ``B(u) dW``."""
    dW = np.asarray(dW, dtype=float).reshape(1, -1)
    if dW.shape[1] != model.mode_count:
        raise ValueError(f"expected {model.mode_count} increments, got {dW.shape[1]}")
    out = model.apply_batch(u.flat[None, :], dW)[0]
    return GridFunction(u.grid, out.reshape(u.grid.shape), u.space)


def hs_norm_sq(model: DiffusionModel, u: GridFunction) -> float:
    """Squared Hilbert-Schmidt norm: sum of squared mode-response norms."""
    return float(model.hs_norm_sq_batch(u.flat[None, :])[0])


# ---------------------------------------------------------------------------
# scheme and trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeParams:
    """Time-stepping parameters of the regularized scheme.

    delta is the Yosida parameter the potential must carry (None for
    prox-friendly families like the quadratic ones); eps_visc adds the
    viscosity energy; ic_smoothing applies that many implicit heat steps to
    the initial state before time stepping.
    """

    dt: float
    steps: int
    delta: float | None = None
    eps_visc: float = 0.0
    ic_smoothing: int = 0
    drift: str = "implicit_prox"
    prox_tol: float = 1e-9

    def __post_init__(self):
        if self.dt <= 0 or self.steps <= 0:
            raise ValueError("dt and steps must be positive")
        if self.drift not in ("implicit_prox", "explicit_yosida"):
            raise ValueError(f"unknown drift mode {self.drift!r}")
        if self.drift == "explicit_yosida":
            if self.delta is None:
                raise ValueError("explicit_yosida drift requires delta")
            if self.dt > self.delta / 4.0:
                raise ValueError(
                    f"explicit Yosida drift needs dt <= delta/4 = {self.delta / 4.0:g}, got dt={self.dt:g}"
                )


@dataclass
class TrajectoryEnsemble:
    """Seeded Monte-Carlo collection of time-discrete sample paths.

    ``states`` has shape (paths, steps+1, cells); ``increments`` holds the
    Brownian increments (paths, steps, modes) that produced it, enabling
    common-noise coupling and test-process realization on identical noise.
    """

    grid: Grid
    space: str
    states: np.ndarray
    increments: np.ndarray
    dt: float
    seed: int
    scheme: SchemeParams
    potential_label: str = ""
    model_label: str = ""
    dt_drift_lipschitz: float | None = None  # stability indicator of the run

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def state(self, path: int, step: int) -> GridFunction:
        return GridFunction(self.grid, self.states[path, step].reshape(self.grid.shape), self.space)

    def states_at(self, step: int) -> np.ndarray:
        return self.states[:, step, :]

    def mean_norm_sq(self) -> np.ndarray:
        """E ||X_t||_H^2 estimate per stored step."""
        return np.mean(space_norm_sq(self.grid, self.states, self.space), axis=0)

    def realized_drift(self, model: DiffusionModel) -> np.ndarray:
        """Per-step drift increments ``(X_{n+1} - X_n - B(X_n) dW_n) / dt``.

        For the implicit scheme each returned row is an exact element of the
        negative subdifferential at X_{n+1} (prox optimality).
        """
        out = np.empty((self.n_paths, self.n_steps, self.grid.num_cells))
        for n in range(self.n_steps):
            noise = model.apply_batch(self.states[:, n, :], self.increments[:, n, :])
            out[:, n, :] = (self.states[:, n + 1, :] - self.states[:, n, :] - noise) / self.dt
        return out

    def to_csv(self, path, stride: int = 1) -> None:
        """Dump (path, step, cell_index, value) rows, optionally strided."""
        if stride < 1:
            raise ValueError("stride must be a positive integer")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("path,step,cell_index,value\n")
            for p in range(self.n_paths):
                for s in range(0, self.n_steps + 1, stride):
                    row = self.states[p, s]
                    for c in range(row.size):
                        fh.write(f"{p},{s},{c},{row[c]:.17g}\n")

    def manifest_text(self) -> str:
        lines = [
            f"seed = {self.seed}",
            f"paths = {self.n_paths}",
            f"steps = {self.n_steps}",
            f"dt = {self.dt:.17g}",
            f"space = {self.space}",
            f"grid_shape = {self.grid.shape}",
            f"grid_extents = {self.grid.extents}",
            f"scheme = {self.scheme}",
            f"potential = {self.potential_label}",
            f"noise = {self.model_label}",
        ]
        if self.dt_drift_lipschitz is not None:
            lines.append(f"dt_times_drift_lipschitz = {self.dt_drift_lipschitz:.6g}")
        return "\n".join(lines) + "\n"


def gaussian_increments(seed: int, n_paths: int, steps: int, modes: int, dt: float) -> np.ndarray:
    """Counter-based increments, variance dt, keyed by (seed, path)."""
    out = np.empty((n_paths, steps, modes))
    root = np.sqrt(dt)
    for p in range(n_paths):
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), p))))
        out[p] = root * gen.standard_normal((steps, modes))
    return out


def _check_scheme_potential(pot: Potential, sp: SchemeParams):
    if sp.delta is not None:
        if pot.delta is None or not np.isclose(pot.delta, sp.delta):
            raise ValueError(
                f"scheme delta {sp.delta} does not match the potential's "
                f"regularization {pot.delta}"
            )
    elif pot.delta is None and not pot.profile.curvature_bounded and sp.drift == "explicit_yosida":
        raise ValueError("explicit drift needs a Yosida-regularized potential")


def _advance(X: np.ndarray, pot: Potential, model: DiffusionModel, sp: SchemeParams, dW: np.ndarray) -> np.ndarray:
    Y = X + model.apply_batch(X, dW)
    if sp.drift == "implicit_prox":
        Z, _, _ = pot.prox_batch(sp.dt, Y, tol=sp.prox_tol, warm=X)
        return Z
    return Y - sp.dt * pot.yosida_gradient_batch(X)


def step(
    state: GridFunction,
    pot: Potential,
    model: DiffusionModel,
    sp: SchemeParams,
    dW,
) -> GridFunction:
    """One scheme step from a single state; deterministic given inputs."""
    _check_scheme_potential(pot, sp)
    if state.space != pot.space:
        raise ValueError(f"state must be {pot.space}-tagged for this potential")
    dW = np.asarray(dW, dtype=float).reshape(1, -1)
    if dW.shape[1] != model.mode_count:
        raise ValueError(f"expected {model.mode_count} increments, got {dW.shape[1]}")
    out = _advance(state.flat[None, :], pot, model, sp, dW)[0]
    return GridFunction(state.grid, out.reshape(state.grid.shape), state.space)


def _smooth_initial(grid: Grid, X: np.ndarray, rounds: int) -> np.ndarray:
    """Implicit heat half-steps (I + h^2 * neumann_neg_laplacian)^-1 per round."""
    if rounds <= 0:
        return X
    import scipy.sparse as sps
    import scipy.sparse.linalg as spla

    from .grids import NEUMANN, neg_laplacian_matrix

    tau = float(np.mean(np.asarray(grid.spacing)) ** 2)
    A = (sps.eye(grid.num_cells) + tau * neg_laplacian_matrix(grid, NEUMANN)).tocsc()
    lu = spla.splu(A)
    out = X
    for _ in range(rounds):
        out = lu.solve(out.T).T
    return out


def simulate(
    x0,
    pot: Potential,
    model: DiffusionModel,
    sp: SchemeParams,
    n_paths: int,
    seed: int,
) -> TrajectoryEnsemble:
    """Monte-Carlo ensemble of the scheme; stores all states and increments.

    ``x0`` is a GridFunction or a callable ``path_rng -> GridFunction``
    sampled per path from a child stream of the ensemble seed.
    """
    _check_scheme_potential(pot, sp)
    grid = pot.grid
    n = grid.num_cells
    X = np.empty((n_paths, n))
    if callable(x0):
        for p in range(n_paths):
            gen = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), p, 0xA5))))
            g0 = x0(gen)
            X[p] = g0.flat
    else:
        if x0.grid != grid or x0.space != pot.space:
            raise ValueError("initial state must live on the potential's grid and space")
        X[:] = x0.flat
    X = _smooth_initial(grid, X, sp.ic_smoothing)
    increments = gaussian_increments(seed, n_paths, sp.steps, model.mode_count, sp.dt)
    drift_bound = pot.drift_lipschitz_bound()
    dt_lip = sp.dt * drift_bound if drift_bound is not None else None
    states = np.empty((n_paths, sp.steps + 1, n))
    states[:, 0, :] = X
    for nstep in range(sp.steps):
        X = _advance(X, pot, model, sp, increments[:, nstep, :])
        states[:, nstep + 1, :] = X
    return TrajectoryEnsemble(
        grid=grid,
        space=pot.space,
        states=states,
        increments=increments,
        dt=sp.dt,
        seed=int(seed),
        scheme=sp,
        potential_label=pot.label,
        model_label=model.label,
        dt_drift_lipschitz=dt_lip,
    )


def simulate_coupled(
    x0,
    y0,
    pot_x: Potential,
    pot_y: Potential,
    model: DiffusionModel,
    sp: SchemeParams,
    n_paths: int,
    seed: int,
) -> tuple[TrajectoryEnsemble, TrajectoryEnsemble]:
    """Two ensembles driven by identical Brownian increments (common noise)."""
    ens_x = simulate(x0, pot_x, model, sp, n_paths, seed)
    ens_y = simulate(y0, pot_y, model, sp, n_paths, seed)
    if not np.array_equal(ens_x.increments, ens_y.increments):
        raise AssertionError("coupling broken: increments differ")
    return ens_x, ens_y
