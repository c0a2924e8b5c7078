import math

import numpy as np
import pytest

from rqhd_lab.errors import AdmissibilityError, DegenerateParameterError, NoConvergenceError
from rqhd_lab.kg import Params
from rqhd_lab.madelung import make_hydro_state
from rqhd_lab.rqhd import (
    CauchyData,
    assemble_sources,
    auto_window,
    cauchy_from_hydro,
    compare_kg_picard,
    conserved_charge,
    energy_estimate_ratio,
    h1_sup_diff,
    linear_wave_solve,
    monitor_estimates,
    picard_iterate,
    picard_solve,
    reformulate,
    residual_norms,
    source_terms,
    to_hydro,
    unreformulate,
)
from rqhd_lab.rqhd.identities import reformulation_roundtrip
from rqhd_lab.rqhd.picard import initial_history
from rqhd_lab.spectral import SpectralGrid

from conftest import smooth_field


def sine_data(grid, amplitude=0.01, nbar=1.0):
    x = grid.coords[0]
    z = np.zeros(grid.shape)
    return cauchy_from_hydro(grid, nbar * (1 + amplitude * np.sin(x)), z, z, z, Params(nbar=nbar))


def trivial_data(grid):
    z = np.zeros(grid.shape)
    return CauchyData(grid, z, z, z, z)


class TestReformulate:
    def test_trivial(self, grid1, params):
        z = np.zeros(grid1.shape)
        r = reformulate(make_hydro_state(grid1, np.ones(grid1.shape), z, z, None, z, params), params)
        assert np.all(r.psi == 0) and np.all(r.Phi == 0) and np.max(np.abs(r.Psi)) == 0

    def test_constructed_amplitude(self, grid1):
        x = grid1.coords[0]
        n = (0.1 * np.sin(x) + 1.0) ** 2
        p = Params(background=float(np.mean(n)))
        z = np.zeros(grid1.shape)
        r = reformulate(make_hydro_state(grid1, n, z, z, None, z, p), p)
        np.testing.assert_allclose(r.Psi, 0.1 * np.sin(x), atol=1e-15)

    def test_round_trip(self, grid2, rng):
        for _ in range(5):
            assert reformulation_roundtrip(grid2, Params(), rng) <= 1e-12

    def test_inverse_keeps_winding(self, grid1, params):
        z = np.zeros(grid1.shape)
        h = make_hydro_state(grid1, np.ones(grid1.shape), z, z, [2], z, params)
        back = unreformulate(reformulate(h, params), params)
        assert back.winding == (2,)
        np.testing.assert_allclose(back.grad_S, h.grad_S, atol=1e-14)


class TestSources:
    def test_trivial(self, grid1, params):
        U = initial_history(trivial_data(grid1), params, 4, 0.01)
        src = assemble_sources(U, params)
        assert np.max(np.abs(src.f)) == 0 and np.max(np.abs(src.g)) == 0 and np.max(np.abs(src.h)) == 0

    def test_phase_rate_source(self, grid1):
        p = Params(nbar=2.0, background=2.0)
        z = np.zeros(grid1.shape)
        _, g, _ = source_terms(grid1, z, np.ones(grid1.shape), z, z, z, p)
        np.testing.assert_allclose(g, -math.sqrt(2.0), atol=1e-14)

    def test_initial_slice_matches_direct_formula(self, grid1, rng):
        eps, ups, nbar = 0.8, 0.6, 1.0
        p = Params(epsilon=eps, upsilon=ups)
        psi0 = 0.05 * smooth_field(grid1, rng)
        psi1 = 0.05 * smooth_field(grid1, rng)
        Psi0 = 0.02 * smooth_field(grid1, rng)
        Psi0 -= np.mean((Psi0 + 1) ** 2) - 1  # near-neutral; exact neutrality not needed here
        Psi1 = 0.02 * smooth_field(grid1, rng)
        data = CauchyData(grid1, psi0, psi1, Psi0, Psi1)
        U = initial_history(data, Params(epsilon=eps, upsilon=ups, drift_tol=1.0), 3, 0.01)
        src = assemble_sources(U, p, dealias=False)
        # independent evaluation with finite-difference free, real-space products
        d = grid1.gradient
        R = Psi0 + math.sqrt(nbar)
        n, n_t = R**2, 2 * R * Psi1
        f = (n_t * (1 - ups**2 * psi1) + d(n)[0] * d(psi0)[0]) / (ups**2 * n)
        g = R * (ups**2 * psi1**2 - 2 * psi1 - d(psi0)[0] ** 2 - 2 * U.Phi[0]) / (eps**2 * ups**2)
        np.testing.assert_allclose(src.f[0], f, atol=1e-12)
        np.testing.assert_allclose(src.g[0], g, atol=1e-12)
        np.testing.assert_allclose(src.h[0], n - p.b0, atol=1e-12)

    def test_upsilon_zero_is_degenerate(self, grid1):
        z = np.zeros(grid1.shape)
        with pytest.raises(DegenerateParameterError):
            source_terms(grid1, z, z, z, z, z, Params(upsilon=0.0))


class TestLinearWave:
    def test_homogeneous_is_exact(self, grid1):
        x = grid1.coords[0]
        dt, nt = 0.05, 41
        u, u_t = linear_wave_solve(grid1, np.sin(x), np.zeros(grid1.shape), np.zeros((nt,) + grid1.shape), dt)
        t = dt * np.arange(nt)[:, None]
        np.testing.assert_allclose(u, np.cos(t) * np.sin(x), atol=1e-13)
        np.testing.assert_allclose(u_t, -np.sin(t) * np.sin(x), atol=1e-13)

    def test_constant_forcing(self, grid1):
        dt, nt, c0 = 0.01, 101, 0.7
        z = np.zeros(grid1.shape)
        u, _ = linear_wave_solve(grid1, z, z, np.full((nt,) + grid1.shape, c0), dt)
        t = dt * np.arange(nt)
        np.testing.assert_allclose(u.mean(axis=1), c0 * t**2 / 2, atol=1e-12)

    def test_zero(self, grid1):
        z = np.zeros(grid1.shape)
        u, u_t = linear_wave_solve(grid1, z, z, np.zeros((5,) + grid1.shape), 0.1)
        assert np.all(u == 0) and np.all(u_t == 0)

    def test_forced_second_order(self, grid1):
        # u'' - Lap u = cos(2t) sin x has the solution -cos(2t) sin(x) / 3
        x = grid1.coords[0]
        errs = []
        for dt in (0.02, 0.01, 0.005):
            nt = int(round(1 / dt)) + 1
            t = dt * np.arange(nt)[:, None]
            u, _ = linear_wave_solve(grid1, -np.sin(x) / 3, np.zeros(grid1.shape), np.cos(2 * t) * np.sin(x), dt)
            errs.append(np.max(np.abs(u[-1] + np.cos(2.0) * np.sin(x) / 3)))
        assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5

    def test_wave_speed(self, grid1):
        x = grid1.coords[0]
        dt, nt, c = 0.05, 21, 2.0
        u, _ = linear_wave_solve(grid1, np.sin(x), np.zeros(grid1.shape), np.zeros((nt,) + grid1.shape), dt, c)
        np.testing.assert_allclose(u[-1], np.cos(c * 1.0) * np.sin(x), atol=1e-13)

    def test_shape_mismatch(self, grid1):
        z = np.zeros(grid1.shape)
        with pytest.raises(ValueError):
            linear_wave_solve(grid1, z, z, np.zeros((3, 8)), 0.1)


class TestPicard:
    def test_trivial_fixed_point(self, grid1, params):
        data = trivial_data(grid1)
        U = initial_history(data, params, 5, 0.01)
        V = picard_iterate(U, data, params)
        assert h1_sup_diff(U, V) == 0

    def test_trivial_solve(self, grid1, params):
        traj, report, _ = picard_solve(trivial_data(grid1), params, 0.1, 0.01)
        assert report.iterations == 1 and report.successive_diffs == [0.0] and report.converged
        assert len(traj) == 11

    def test_contraction(self, grid1, params):
        data = sine_data(grid1)
        U = initial_history(data, params, 51, 0.002)
        diffs = []
        for _ in range(4):
            V = picard_iterate(U, data, params)
            diffs.append(h1_sup_diff(U, V))
            U = V
        assert all(b < a for a, b in zip(diffs, diffs[1:]))

    def test_sine_data_matches_kg(self):
        g = SpectralGrid.uniform(1, 64)
        x = g.coords[0]
        z = np.zeros(g.shape)
        res = compare_kg_picard(g, 1 + 0.01 * np.sin(x), z, z, z, Params(), 0.1, 1e-3, tol=1e-11)
        assert res.report.converged and res.report.contraction_ratio_estimate < 1
        final_n = g.l2_norm(res.kg.final.n - res.picard.final.n)
        assert final_n <= 1e-4 and res.distance <= 1e-4

    def test_charge_is_constant(self):
        g = SpectralGrid.uniform(1, 64)
        traj, report, est = picard_solve(sine_data(g, 0.05), Params(), 0.2, 2e-3, tol=1e-11)
        q = np.array(est.norm_history["Q"])
        assert np.max(np.abs(q - q[0])) <= 1e-6 * abs(q[0])
        h = to_hydro(traj, Params())
        q2 = np.array([conserved_charge(s, Params()) for s in h])
        np.testing.assert_allclose(q2, q, rtol=1e-12)

    def test_fixed_points_have_second_order_residuals(self, rng):
        g = SpectralGrid.uniform(1, 32)
        p = Params()
        for _ in range(5):
            f = smooth_field(g, rng, modes=2)
            n0 = 1 + 0.02 * (f - f.mean()) / np.max(np.abs(f - f.mean()))
            S0 = 0.01 * smooth_field(g, rng, modes=2)
            z = np.zeros(g.shape)
            data = cauchy_from_hydro(g, n0, z, S0, z, p)
            norms = []
            for dt in (4e-3, 2e-3):
                traj, _, _ = picard_solve(data, p, 0.1, dt, tol=1e-12)
                norms.append(residual_norms(to_hydro(traj, p), p))
            for coarse, fine in zip(*norms):
                assert 3.0 < coarse / fine < 5.0

    def test_inadmissible_data(self, grid1, params):
        with pytest.raises(AdmissibilityError):
            picard_solve(sine_data(grid1, 0.5), params, 0.1, 0.01)

    def test_windows_match_single_sweep(self):
        g = SpectralGrid.uniform(1, 32)
        p = Params()
        data = sine_data(g)
        full, _, _ = picard_solve(data, p, 0.1, 2e-3, tol=1e-12)
        windowed, report, _ = picard_solve(data, p, 0.1, 2e-3, tol=1e-12, window=0.02)
        assert len(report.window_iterations) == 5
        assert len(full) == len(windowed)
        assert np.max(np.abs(full.final.Psi - windowed.final.Psi)) <= 1e-9

    def test_auto_window(self):
        assert math.isclose(auto_window(Params(epsilon=0.5, upsilon=0.4)), 0.25 * 0.5 * 0.16 / 2)

    def test_divergence_is_reported(self):
        g = SpectralGrid.uniform(1, 32)
        p = Params(epsilon=0.3, upsilon=0.3)
        with pytest.raises(NoConvergenceError) as info:
            picard_solve(sine_data(g, 0.05), p, 1.0, 5e-3, max_iter=30)
        report = info.value.report
        assert report is not None and not report.converged
        assert report.iterations == len(report.successive_diffs) > 0


class TestMonitor:
    def test_trivial(self, grid1, params):
        traj, _, est = picard_solve(trivial_data(grid1), params, 0.05, 0.01)
        assert est.I0 == 0 and est.M0 == 0 and est.M1 == 0
        assert est.a0 >= 1 and est.Tstar <= 1

    def test_initial_size_two_ways(self, grid1, params):
        data = sine_data(grid1)
        est = monitor_estimates(picard_solve(data, params, 0.02, 0.01)[0], data, params)

        def hk(f, k):
            return math.sqrt(sum(grid1.integrate(grid1.partial(f, [j]) ** 2) for j in range(k + 1)))

        R0 = data.Psi0 + 1.0
        direct = (math.sqrt(grid1.integrate((R0**2 - 1.0) ** 2)) + hk(data.psi1, 3) + hk(data.Psi1, 3)
                  + hk(data.psi0, 4) + hk(data.Psi0, 4))
        assert math.isclose(est.I0, direct, rel_tol=1e-10)
        assert math.isclose(est.M0, 4 * est.I0) and est.M0 == est.M1

    def test_energy_inequality_with_calibrated_constant(self, grid1, rng):
        dt, nt = 0.01, 201
        F = np.zeros((nt,) + grid1.shape)
        u0, u1 = smooth_field(grid1, rng), smooth_field(grid1, rng)
        u, u_t = linear_wave_solve(grid1, u0, u1, F, dt)
        _, C = energy_estimate_ratio(grid1, u, u_t, F, dt)
        for scale in (0.1, 3.0):
            v, v_t = linear_wave_solve(grid1, scale * u0, scale * u1, F, dt)
            ratio, _ = energy_estimate_ratio(grid1, v, v_t, F, dt, C)
            assert ratio <= 1 + 1e-12

    def test_norm_history_columns(self, grid1, params):
        _, _, est = picard_solve(sine_data(grid1), params, 0.02, 0.01)
        header = est.norm_history_csv().splitlines()[0]
        assert header == "t,psi_H4,psit_H3,psitt_H2,Psi_H4,Psit_H3,Psitt_H2,Phi_H4,min_n,Q"
        assert all(v >= 0 for k, col in est.norm_history.items() if k not in ("t", "Q") for v in col)
