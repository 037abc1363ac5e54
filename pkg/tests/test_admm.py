import numpy as np
import pytest

from dfrc.comms import CommSpec, make_comm_spec, mui_all
from dfrc.linalg import SpectralLowRank
from dfrc.model import Scenario, Waveform, lfm_waveform
from dfrc.solver import SolverParams, admm_solve, build_R0_R1, build_T, update_filter
from dfrc.solver.admm import lambda_max_B

from conftest import crandn, random_cm, small_scenario


def _structured_T(rng, sc, g_scale=0.5):
    w = crandn(rng, sc.n_y)
    r0, r1 = build_R0_R1(w, sc)
    x = random_cm(sc, rng)
    g = g_scale * r0.quad(x.x) / r1.quad(x.x)
    return build_T(r0, r1, g, structured=True).T


def test_lambda_max_B_matches_dense(rng):
    sc = small_scenario()
    T = _structured_T(rng, sc)
    H = crandn(rng, 2, sc.n_tx)
    B = T.materialize() + np.kron(np.eye(sc.code_length), H.conj().T @ H)
    assert np.isclose(lambda_max_B(T, H, sc.code_length), np.linalg.eigvalsh(B)[-1], rtol=1e-10)
    assert np.isclose(lambda_max_B(T, H[:0], sc.code_length), np.linalg.eigvalsh(T.materialize())[-1],
                      rtol=1e-10)


@pytest.mark.parametrize("M", [0, 1, 2])
def test_dense_and_structured_paths_agree(M):
    rng = np.random.default_rng(10 + M)
    sc = small_scenario()
    T = _structured_T(rng, sc)
    spec = make_comm_spec(sc, ["QPSK", "QAM8"][:M], [5.0] * M, [1e-2] * M, [1.0] * M, seed=M)
    x0 = random_cm(sc, rng)
    p = SolverParams(max_admm=5, max_mm=50)
    a = admm_solve(T, spec, x0, p)
    b = admm_solve(T.materialize(), spec, x0, p)
    assert a.iterations == b.iterations
    assert np.allclose(a.x.x, b.x.x, atol=1e-8)
    assert np.allclose(a.primal_trace, b.primal_trace, rtol=1e-6, atol=1e-10)
    assert np.allclose(a.dual_trace, b.dual_trace, rtol=1e-6, atol=1e-10)


@pytest.mark.parametrize("mu", [4.1, 10.0])
@pytest.mark.parametrize("backend", ["structured", "dense"])
def test_identity_T_without_users(mu, backend):
    # x is a CM fixed point from the first step on; the split residual then
    # contracts exactly by 2/(mu-2) per iteration (scalar dual recursion).
    sc = small_scenario()
    n = sc.n_x
    T = SpectralLowRank(1.0, np.zeros((n, 0), complex), np.zeros(0))
    x0 = random_cm(sc, np.random.default_rng(0))
    p = SolverParams(mu=mu, max_admm=8, backend=backend)
    res = admm_solve(T if backend == "structured" else np.eye(n), CommSpec.empty(sc.n_tx, sc.code_length), x0, p)
    assert np.allclose(res.x.x, x0.x, atol=1e-14)
    ratios = res.primal_trace[1:] / res.primal_trace[:-1]
    assert np.allclose(ratios, 2.0 / (mu - 2.0), rtol=1e-9)
    kappa = mu / (mu - 2.0)
    first = (kappa - 1.0) * np.sqrt(sc.total_energy)
    assert np.isclose(res.primal_trace[0], first, rtol=1e-12)


def test_tiny_instance_against_phase_grid():
    rng = np.random.default_rng(21)
    sc = small_scenario(n_tx=2, n_rx=2, L=2, energy=4.0)
    n = sc.n_x
    A = crandn(rng, n, n)
    T = A @ A.conj().T
    h = crandn(rng, 1, sc.n_tx)
    s = crandn(rng, 1, sc.code_length)
    spec = CommSpec(h, s, [1e3], [1.0])  # generous budget
    # brute force over phases; x^H T x is invariant to a common phase, so fix x_1
    amp = np.sqrt(sc.p_s)
    grid = np.linspace(0, 2 * np.pi, 181)[:-1]
    P = np.stack(np.meshgrid(*([grid] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
    X = amp * np.exp(1j * np.concatenate([np.zeros((len(P), 1)), P], axis=1))
    best = np.einsum("ij,jk,ik->i", X.conj(), T, X).real.max()
    got = -np.inf
    for seed in range(5):
        res = admm_solve(T, spec, random_cm(sc, np.random.default_rng(seed)), SolverParams(max_admm=2000))
        assert mui_all(res.x, spec)[0] <= 1e3
        got = max(got, np.vdot(res.x.x, T @ res.x.x).real)
    # the grid optimum is itself within a few 1e-4 of the true maximum
    assert got >= best * (1 - 1e-4)


def test_default_subproblem_reports_residuals():
    sc = Scenario()
    spec = make_comm_spec(sc, ["QPSK", "QAM8"], [20.0, 20.0], [1e-3, 5e-3], [1.0, 1.0], seed=0)
    x0 = lfm_waveform(sc)
    w = update_filter(x0, sc)
    r0, r1 = build_R0_R1(w, sc)
    t = build_T(r0, r1, r0.quad(x0.x) / r1.quad(x0.x), structured=True)
    from dfrc.solver.outer import _balanced

    t = _balanced(t, spec, SolverParams())
    p = SolverParams(max_admm=20000)
    res = admm_solve(t, spec, x0, p)
    assert res.iterations == len(res.primal_trace)
    assert res.primal.shape == (3,) and res.dual.shape == (4,)
    assert res.converged
    assert np.all(res.primal <= p.eps_primal) and np.all(res.dual <= p.eps_dual)
    assert isinstance(res.x, Waveform) and res.x.magnitudes is None


@pytest.mark.parametrize("rho", [1.0, 2.0])
def test_papr_mode_constraints_hold(rho):
    rng = np.random.default_rng(5)
    sc = small_scenario()
    T = _structured_T(rng, sc)
    spec = make_comm_spec(sc, ["QPSK"], [5.0], [1e-2], [1.0], seed=1)
    x0 = random_cm(sc, rng)
    for p in (SolverParams(papr_rho=rho, max_admm=50), SolverParams(papr_rho=rho, max_admm=50, backend="dense")):
        t = T if p.backend == "structured" else T.materialize()
        res = admm_solve(t, spec, x0, p)
        blocks = res.x.x.reshape(sc.code_length, sc.n_tx)
        e = np.sum(np.abs(blocks) ** 2, axis=0)
        assert np.allclose(e, sc.total_energy / sc.n_tx, rtol=1e-12)
        assert np.all(np.max(np.abs(blocks) ** 2, axis=0) / (e / sc.code_length) <= rho * (1 + 1e-10))
