import numpy as np
import pytest

from oracles import neumann_laplacian_dense, ou_second_moment
from spdelab import engine, potentials
from spdelab.grids import HMINUS1, GridFunction, Grid, interval_grid, norm
from spdelab.engine import (
    AdditiveNoise,
    LinearMultiplicativeNoise,
    NemytskiiNoise,
    SchemeParams,
    apply_B,
    gaussian_increments,
    hs_norm_sq,
    simulate,
    simulate_coupled,
    step,
)

rng = np.random.default_rng(808)


def grid64():
    return interval_grid(64)


def sine_ic(grid, space="L2", amp=1.0):
    x = grid.axis_centers(0)
    return GridFunction(grid, amp * np.sin(np.pi * x), space)


def additive_model(grid, amp=0.1, space="L2"):
    x = grid.axis_centers(0)
    return AdditiveNoise(
        [
            GridFunction(grid, amp * np.sin(np.pi * x), space),
            GridFunction(grid, amp * np.cos(2 * np.pi * x), space),
        ]
    )


# ---------------------------------------------------------------------------
# diffusion models
# ---------------------------------------------------------------------------


def test_apply_b_zero_increment():
    g = grid64()
    model = additive_model(g)
    u = GridFunction(g, rng.standard_normal(64))
    assert np.abs(apply_B(model, u, [0.0, 0.0]).values).max() == 0.0


def test_apply_b_additive_constant_mode():
    g = grid64()
    model = AdditiveNoise([GridFunction(g, np.ones(64))])
    u = GridFunction(g, rng.standard_normal(64))
    out = apply_B(model, u, [0.3])
    assert out.values == pytest.approx(np.full(64, 0.3))


def test_apply_b_multiplicative_vanishes_at_zero():
    g = grid64()
    model = LinearMultiplicativeNoise([GridFunction(g, np.ones(64))])
    out = apply_B(model, GridFunction(g, np.zeros(64)), [0.7])
    assert np.abs(out.values).max() == 0.0


def test_apply_b_mode_count_mismatch():
    g = grid64()
    model = additive_model(g)
    with pytest.raises(ValueError):
        apply_B(model, GridFunction(g, np.zeros(64)), [0.1])


def test_hs_norm_additive_independent_of_state():
    g = grid64()
    model = additive_model(g)
    u, v = GridFunction(g, rng.standard_normal(64)), GridFunction(g, rng.standard_normal(64))
    assert hs_norm_sq(model, u) == pytest.approx(hs_norm_sq(model, v))


def test_hs_norm_multiplicative_at_one():
    g = grid64()
    fields = [GridFunction(g, rng.standard_normal(64)) for _ in range(3)]
    model = LinearMultiplicativeNoise(fields)
    one = GridFunction(g, np.ones(64))
    expected = sum(g.cell_volume * np.sum(f.values**2) for f in fields)
    assert hs_norm_sq(model, one) == pytest.approx(expected)


def test_lipschitz_certificate_dominates_sampled_ratios():
    g = grid64()
    fields = [GridFunction(g, rng.uniform(-1, 1, 64)) for _ in range(2)]
    model = LinearMultiplicativeNoise(fields)
    L = model.lipschitz
    for _ in range(200):
        u = GridFunction(g, rng.standard_normal(64))
        v = GridFunction(g, rng.standard_normal(64))
        du = u.values - v.values
        hs_diff = sum(
            g.cell_volume * np.sum((f.values * du) ** 2) for f in fields
        )
        assert np.sqrt(hs_diff) <= L * norm(u - v) + 1e-12


def test_nemytskii_model_applies_scalar_map():
    g = grid64()
    model = NemytskiiNoise(lambda u: np.tanh(u), 1.0, [GridFunction(g, np.ones(64))])
    u = GridFunction(g, rng.standard_normal(64))
    out = apply_B(model, u, [0.5])
    assert out.values == pytest.approx(0.5 * np.tanh(u.values))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def test_step_damps_neumann_eigenmodes():
    g = grid64()
    pot = potentials.p_dirichlet(g, 2.0)
    sp = SchemeParams(dt=5e-3, steps=1)
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    x = g.axis_centers(0)
    h = g.spacing[0]
    for k in (1, 3, 7):
        mode = GridFunction(g, np.cos(k * np.pi * x))
        out = step(mode, pot, zero, sp, [0.0])
        lam = 2 * (1 - np.cos(k * np.pi / 64)) / h**2
        assert out.values == pytest.approx(mode.values / (1 + sp.dt * lam), rel=1e-10)


def test_step_keeps_constants_fixed():
    g = grid64()
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    const = GridFunction(g, np.full(64, 0.8))
    for pot in (
        potentials.p_dirichlet(g, 1.0, delta=1e-2),
        potentials.p_dirichlet(g, 1.5, delta=1e-2),
        potentials.p_dirichlet(g, 2.0),
    ):
        out = step(const, pot, zero, SchemeParams(dt=1e-3, steps=1, delta=pot.delta), [0.0])
        assert np.abs(out.values - 0.8).max() < 1e-12


def test_step_single_cell_fast_diffusion_closed_form():
    g = interval_grid(1)
    pot = potentials.fast_diffusion(g, 1.0)
    zero = AdditiveNoise([GridFunction(g, np.zeros(1), HMINUS1)])
    x0 = GridFunction(g, np.array([2.0]), HMINUS1)
    dt = 1e-2
    out = step(x0, pot, zero, SchemeParams(dt=dt, steps=1), [0.0])
    # single Dirichlet cell: z + dt * (2/h^2) z = x0
    h = g.spacing[0]
    assert out.values[0] == pytest.approx(2.0 / (1 + dt * 2 / h**2), rel=1e-12)


def test_scheme_delta_mismatch_rejected():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.5, delta=1e-2)
    sp = SchemeParams(dt=1e-3, steps=1, delta=1e-3)
    with pytest.raises(ValueError):
        step(sine_ic(g), pot, additive_model(g), sp, [0.0, 0.0])


def test_explicit_drift_requires_small_steps():
    with pytest.raises(ValueError):
        SchemeParams(dt=1e-2, steps=1, delta=1e-2, drift="explicit_yosida")
    sp = SchemeParams(dt=1e-3, steps=1, delta=1e-2, drift="explicit_yosida")
    assert sp.drift == "explicit_yosida"


def test_explicit_drift_matches_yosida_gradient_formula():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.5, delta=0.1)
    model = additive_model(g)
    x0 = sine_ic(g)
    dt = 1e-2
    dW = [0.02, -0.01]
    out = step(x0, pot, model, SchemeParams(dt=dt, steps=1, delta=0.1, drift="explicit_yosida"), dW)
    expected = x0.values + apply_B(model, x0, dW).values - dt * pot.yosida_gradient(x0).values
    assert out.values == pytest.approx(expected, abs=1e-14)


def test_explicit_and_implicit_drifts_converge_together():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.5, delta=0.1)
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    x0 = sine_ic(g)
    diffs = []
    for dt in (1e-2, 2.5e-3):
        imp = step(x0, pot, zero, SchemeParams(dt=dt, steps=1, delta=0.1), [0.0])
        exp = step(x0, pot, zero, SchemeParams(dt=dt, steps=1, delta=0.1, drift="explicit_yosida"), [0.0])
        diffs.append(norm(imp - exp))
    assert diffs[1] < 0.5 * diffs[0]  # one-step gap shrinks superlinearly in dt


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def test_simulate_seed_reproducibility():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.5, delta=1e-2)
    sp = SchemeParams(dt=1e-3, steps=20, delta=1e-2)
    model = additive_model(g)
    a = simulate(sine_ic(g), pot, model, sp, 8, seed=31)
    b = simulate(sine_ic(g), pot, model, sp, 8, seed=31)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.increments, b.increments)
    c = simulate(sine_ic(g), pot, model, sp, 8, seed=32)
    assert not np.array_equal(a.states, c.states)


def test_simulate_single_path_no_noise_is_deterministic_scheme():
    g = grid64()
    pot = potentials.p_dirichlet(g, 2.0)
    sp = SchemeParams(dt=1e-3, steps=10)
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    ens = simulate(sine_ic(g), pot, zero, sp, 1, seed=3)
    state = sine_ic(g)
    for n in range(10):
        state = step(state, pot, zero, sp, [0.0])
        assert ens.states[0, n + 1] == pytest.approx(state.flat)


def test_increment_statistics():
    inc = gaussian_increments(7, 400, 30, 2, dt=1e-3)
    var = inc.var(axis=(0,))  # (steps, modes)
    se = 1e-3 * np.sqrt(2.0 / 400)
    assert np.all(np.abs(var - 1e-3) < 5 * se)


def test_ensemble_mean_matches_noiseless_for_linear_dynamics():
    # expectation is exact for linear dynamics with additive noise; compare a
    # scalar pairing of the final states so 3 standard errors is the right bar
    g = interval_grid(32)
    pot = potentials.p_dirichlet(g, 2.0)
    sp = SchemeParams(dt=2e-3, steps=40)
    model = additive_model(g, amp=0.15)
    ens = simulate(sine_ic(g), pot, model, sp, 200, seed=12)
    zero = AdditiveNoise([GridFunction(g, np.zeros(32))])
    det = simulate(sine_ic(g), pot, zero, sp, 1, seed=1)
    probe = np.sin(np.pi * g.axis_centers(0))
    stats = ens.states[:, -1, :] @ probe
    target = det.states[0, -1, :] @ probe
    se = stats.std(ddof=1) / np.sqrt(200)
    assert abs(stats.mean() - target) <= 3.0 * se


def test_second_moment_matches_ou_recursion_oracle():
    g = interval_grid(24)
    pot = potentials.p_dirichlet(g, 2.0)
    dt, steps = 2e-3, 30
    sp = SchemeParams(dt=dt, steps=steps)
    model = additive_model(g, amp=0.2)
    ens = simulate(GridFunction(g, np.zeros(24)), pot, model, sp, 400, seed=21)
    A = neumann_laplacian_dense(24, g.spacing[0])
    modes = np.stack([m for m in model._modes])
    oracle = ou_second_moment(A, modes, np.zeros(24), dt, steps, g.cell_volume)
    est = ens.mean_norm_sq()
    per_path = g.cell_volume * np.sum(ens.states**2, axis=2)
    se = per_path.std(axis=0, ddof=1) / np.sqrt(400)
    assert np.all(np.abs(est - oracle) <= 3.5 * se + 1e-12)


def test_coupled_runs_share_noise_and_match_for_equal_data():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.5, delta=1e-2)
    sp = SchemeParams(dt=1e-3, steps=15, delta=1e-2)
    model = additive_model(g)
    ex, ey = simulate_coupled(sine_ic(g), sine_ic(g), pot, pot, model, sp, 6, seed=77)
    assert np.array_equal(ex.states, ey.states)


def test_contraction_certificate_under_common_noise():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.0, delta=1e-2)
    sp = SchemeParams(dt=1e-3, steps=40, delta=1e-2)
    x = g.axis_centers(0)
    model = LinearMultiplicativeNoise([GridFunction(g, 0.3 * (1 + 0.5 * np.sin(np.pi * x)))])
    x0 = sine_ic(g)
    y0 = GridFunction(g, x0.values + 0.1 * np.cos(np.pi * x))
    ex, ey = simulate_coupled(x0, y0, pot, pot, model, sp, 60, seed=9)
    d0 = norm(x0 - y0) ** 2
    diff_sq = g.cell_volume * np.sum((ex.states - ey.states) ** 2, axis=2)
    mean_gap = diff_sq.mean(axis=0)
    C = 2 * model.lipschitz**2 + 1
    times = ex.times()
    rel_se = diff_sq.std(axis=0, ddof=1) / np.sqrt(60) / np.maximum(mean_gap, 1e-300)
    bound = np.exp(C * times) * d0 * (1 + 3 * rel_se)
    assert np.all(mean_gap <= bound + 1e-14 * d0)


def test_energy_non_increasing_without_noise():
    g = grid64()
    pot = potentials.p_dirichlet(g, 1.0, delta=1e-2)
    sp = SchemeParams(dt=2e-3, steps=30, delta=1e-2)
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    ens = simulate(sine_ic(g), pot, zero, sp, 1, seed=2)
    energies = [pot.eval_batch(ens.states[:, s, :])[0] for s in range(31)]
    assert np.all(np.diff(energies) <= 1e-12)


def test_mass_conservation_with_mean_zero_noise():
    g = grid64()
    x = g.axis_centers(0)
    pot = potentials.p_dirichlet(g, 1.3, delta=1e-2)
    sp = SchemeParams(dt=1e-3, steps=25, delta=1e-2)
    model = AdditiveNoise([GridFunction(g, np.sin(2 * np.pi * x))])
    ens = simulate(sine_ic(g), pot, model, sp, 10, seed=4)
    means = ens.states.mean(axis=2)
    assert np.abs(means - means[:, :1]).max() < 1e-10


def test_ic_smoothing_reduces_roughness():
    g = grid64()
    pot = potentials.p_dirichlet(g, 2.0)
    zero = AdditiveNoise([GridFunction(g, np.zeros(64))])
    rough = GridFunction(g, rng.standard_normal(64))
    sp0 = SchemeParams(dt=1e-3, steps=1)
    sp5 = SchemeParams(dt=1e-3, steps=1, ic_smoothing=5)
    e0 = simulate(rough, pot, zero, sp0, 1, seed=1)
    e5 = simulate(rough, pot, zero, sp5, 1, seed=1)
    d2 = potentials.p_dirichlet(g, 2.0)
    rough_energy0 = d2.eval_batch(e0.states[:, 0, :])[0]
    rough_energy5 = d2.eval_batch(e5.states[:, 0, :])[0]
    assert rough_energy5 < 0.5 * rough_energy0


def test_sampled_initial_condition():
    g = interval_grid(16)
    pot = potentials.p_dirichlet(g, 2.0)
    zero = AdditiveNoise([GridFunction(g, np.zeros(16))])
    sp = SchemeParams(dt=1e-3, steps=1)

    def sampler(gen):
        return GridFunction(g, gen.standard_normal(16))

    a = simulate(sampler, pot, zero, sp, 4, seed=10)
    b = simulate(sampler, pot, zero, sp, 4, seed=10)
    assert np.array_equal(a.states[:, 0, :], b.states[:, 0, :])
    assert not np.allclose(a.states[0, 0, :], a.states[1, 0, :])


def test_snapshot_csv_and_manifest(tmp_path):
    g = interval_grid(4)
    pot = potentials.p_dirichlet(g, 2.0)
    zero = AdditiveNoise([GridFunction(g, np.zeros(4))])
    ens = simulate(GridFunction(g, np.ones(4)), pot, zero, SchemeParams(dt=1e-2, steps=2), 2, seed=6)
    out = tmp_path / "traj.csv"
    ens.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "path,step,cell_index,value"
    assert len(lines) == 1 + 2 * 3 * 4
    text = ens.manifest_text()
    assert "seed = 6" in text and "dt =" in text
