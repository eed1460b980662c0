import warnings

import numpy as np
import pytest

from conftest import random_hyperbolic_matrix, random_system
from jumpwave import (
    InitialData,
    SolutionField,
    piecewise_constant_system,
    sample_on_grid,
    solve_generic,
    solve_single_interface,
    solve_two_interface,
    verify_interface,
)
from jumpwave import initial
from jumpwave.errors import (
    EvaluationOnInterfaceWithoutSide,
    MixedSignFamily,
    ValidationError,
    ZeroSpeed,
)


def identity_data(n=1):
    return InitialData(lambda z: np.repeat(z[:, None], n, axis=1), n=n)


class TestSystemValidation:
    def test_zero_speed_rejected(self):
        B = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-4.0, 0.0, 0.0]])
        with pytest.raises(ZeroSpeed):
            piecewise_constant_system([B, 2 * B], [0.0])

    def test_mixed_sign_rejected(self):
        with pytest.raises(MixedSignFamily):
            piecewise_constant_system([np.diag([1.0, -1.0]), np.diag([0.5, 2.0])], [0.0])

    def test_equal_adjacent_warns(self):
        with pytest.warns(UserWarning, match="identical"):
            piecewise_constant_system([np.diag([1.0, 2.0]), np.diag([1.0, 2.0])], [0.0])

    def test_unsorted_interfaces_rejected(self):
        mats = [np.diag([1.0, 2.0]), np.diag([2.0, 3.0]), np.diag([1.5, 2.5])]
        with pytest.raises(ValidationError):
            piecewise_constant_system(mats, [1.0, -1.0])


class TestSingleInterface:
    def test_scalar_middle_branch(self):
        # B- = (2), B+ = (1), u0(z) = z; at (0.5, 1) the backward curve has
        # crossed, so v = v0((lam-/lam+)(z - lam+ t)) = 2 (0.5 - 1) = -1
        sys1 = piecewise_constant_system([[[2.0]], [[1.0]]], [0.0])
        u = solve_single_interface(sys1, identity_data(), 0.5, 1.0)
        assert u[0] == pytest.approx(-1.0, abs=1e-14)

    def test_no_jump_is_transport(self, rng):
        B, lams = random_hyperbolic_matrix(rng, 3, signs=[-1, 1, 1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sys1 = piecewise_constant_system([B, B], [0.0])
        u0 = initial.sine([1.0, 0.5, -0.2], wavenumber=2.0)
        d = sys1.decomps[0]
        for z, t in [(-1.3, 0.4), (0.2, 0.9), (2.0, 1.7)]:
            expect = d.A @ np.array(
                [d.A_inv[j, :] @ u0(z - d.lambdas[j] * t) for j in range(3)])
            got = solve_single_interface(sys1, u0, z, t)
            assert np.allclose(got, expect, atol=1e-12)

    def test_t_zero_returns_initial_data(self):
        sys1 = piecewise_constant_system([[[2.0]], [[1.0]]], [0.0])
        u0 = identity_data()
        assert solve_single_interface(sys1, u0, 0.37, 0.0)[0] == u0(0.37)[0]

    def test_matches_generic_random(self, rng):
        for _ in range(12):
            n = int(rng.integers(1, 5))
            sys1 = random_system(rng, n, 1)
            u0 = initial.gaussian(rng.uniform(-1, 1, size=n), center=0.3, width=0.8)
            for _ in range(40):
                z = rng.uniform(-4, 4)
                t = rng.uniform(0, 2)
                if any(z == zl for zl in sys1.interfaces):
                    continue
                a = solve_single_interface(sys1, u0, z, t)
                b = solve_generic(sys1, u0, z, t)
                assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_interface_needs_side(self):
        sys1 = piecewise_constant_system([[[2.0]], [[1.0]]], [0.0])
        with pytest.raises(EvaluationOnInterfaceWithoutSide):
            solve_single_interface(sys1, identity_data(), 0.0, 1.0)
        um = solve_single_interface(sys1, identity_data(), 0.0, 1.0, side="minus")
        up = solve_single_interface(sys1, identity_data(), 0.0, 1.0, side="plus")
        assert np.isfinite(um).all() and np.isfinite(up).all()


class TestTwoInterface:
    def test_outermost_branch(self):
        # speeds (2, 1, 3), interfaces (0, 1); far right of z2 + lam3 t the
        # data comes straight from t = 0
        sys2 = piecewise_constant_system([[[2.0]], [[1.0]], [[3.0]]], [0.0, 1.0])
        z, t = 6.0, 1.0
        u = solve_two_interface(sys2, identity_data(), z, t)
        assert u[0] == pytest.approx(z - 3.0 * t, abs=1e-14)

    def test_degenerate_equal_regions_is_transport(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sys2 = piecewise_constant_system([[[2.0]], [[2.0]], [[2.0]]], [0.0, 1.0])
        u0 = initial.sine([1.0], wavenumber=1.3)
        for z, t in [(-0.5, 0.7), (0.5, 0.9), (1.5, 0.3), (2.5, 1.1)]:
            got = solve_two_interface(sys2, u0, z, t)
            assert got[0] == pytest.approx(u0(z - 2.0 * t)[0], abs=1e-13)

    def test_double_crossing_matches_generic(self):
        sys2 = piecewise_constant_system([[[2.0]], [[1.0]], [[3.0]]], [0.0, 1.0])
        u0 = identity_data()
        # point whose backward curve crossed both interfaces
        z, t = 1.3, 2.0
        a = solve_two_interface(sys2, u0, z, t)
        b = solve_generic(sys2, u0, z, t)
        assert a[0] == pytest.approx(b[0], abs=1e-12)

    def test_matches_generic_random(self, rng):
        for _ in range(8):
            n = int(rng.integers(1, 5))
            sys2 = random_system(rng, n, 2)
            u0 = initial.gaussian(rng.uniform(-1, 1, size=n), center=-0.2, width=1.1)
            for _ in range(40):
                z = rng.uniform(-5, 5)
                t = rng.uniform(0, 2)
                if any(z == zl for zl in sys2.interfaces):
                    continue
                a = solve_two_interface(sys2, u0, z, t)
                b = solve_generic(sys2, u0, z, t)
                assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


class TestGeneric:
    def test_no_interface_transport(self, rng):
        B, _ = random_hyperbolic_matrix(rng, 2, signs=[-1, 1])
        sys0 = piecewise_constant_system([B])
        u0 = initial.gaussian([1.0, -0.5], width=0.7)
        d = sys0.decomps[0]
        z, t = 0.4, 1.2
        expect = d.A @ np.array(
            [d.A_inv[j, :] @ u0(z - d.lambdas[j] * t) for j in range(2)])
        assert np.allclose(solve_generic(sys0, u0, z, t), expect, atol=1e-13)

    def test_three_interface_affine_chain(self):
        # scalar, speeds (1, 2, 4, 8): compose the crossing chain by hand
        sys3 = piecewise_constant_system(
            [[[1.0]], [[2.0]], [[4.0]], [[8.0]]], [0.0, 1.0, 2.0])
        z, t = 2.5, 1.0
        tau2 = t - (z - 2.0) / 8.0
        tau1 = tau2 - 1.0 / 4.0
        tau0 = tau1 - 1.0 / 2.0
        foot = 0.0 - 1.0 * tau0
        got = solve_generic(sys3, identity_data(), z, t)
        assert got[0] == pytest.approx(foot, abs=1e-13)

    def test_causality_exact_zero(self, rng):
        sys1 = random_system(rng, 3, 1, signs=[-1, -1, 1])
        u0 = initial.compact_bump([1.0, 0.4, -0.7], center=-0.5, width=0.3)
        lam_max = sys1.max_speed()
        t = 0.8
        # probe to the right of the support's domain of influence
        z = -0.5 + 0.3 + lam_max * t + 0.5
        u = solve_generic(sys1, u0, z, t)
        assert np.all(u == 0.0)

    def test_constant_state_preserved_outside_interaction_cone(self, rng):
        # A constant state is preserved wherever no characteristic through the
        # probe has refracted at an interface.  Inside the interaction cone the
        # transmission condition (continuity of A_inv u, not of u) genuinely
        # scatters a constant state, so preservation cannot hold there.
        sys2 = random_system(rng, 3, 2)
        c = np.array([0.7, -1.1, 0.3])
        u0 = InitialData(lambda z: np.tile(c, (z.size, 1)), n=3)
        lam_max = sys2.max_speed()
        z_lo, z_hi = sys2.interfaces[0], sys2.interfaces[-1]
        from jumpwave import trace
        for z, t in [(z_lo - lam_max * 0.5 - 0.1, 0.5),
                     (z_hi + lam_max * 0.9 + 0.1, 0.9),
                     (z_lo - lam_max * 1.4 - 0.5, 1.4)]:
            u = solve_generic(sys2, u0, z, t)
            crossed = any(
                trace(sys2.speed_field(j), z, t).crossings for j in range(3))
            if not crossed:
                assert np.allclose(u, c, atol=1e-12)

    def test_constant_state_v_continuous(self, rng):
        sys2 = random_system(rng, 3, 2)
        c = np.array([0.7, -1.1, 0.3])
        u0 = InitialData(lambda z: np.tile(c, (z.size, 1)), n=3)
        zs = np.setdiff1d(np.linspace(-3, 3, 31), sys2.interfaces)
        field = sample_on_grid(sys2, u0, zs, np.linspace(0.0, 1.2, 5))
        assert verify_interface(field, sys2).max_residual <= 1e-10

    def test_one_sided_derivative_order(self):
        # off the interfaces the solution is C1; one-sided differences in z
        # converge at first order
        sys1 = piecewise_constant_system([[[2.0]], [[1.0]]], [0.0])
        u0 = initial.gaussian([1.0], center=-1.0, width=0.6)
        z0, t = 0.35, 1.0

        def val(z):
            return solve_single_interface(sys1, u0, z, t)[0]

        hs = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
        fds = np.array([(val(z0 + h) - val(z0)) / h for h in hs])
        errs = np.abs(fds[:-1] - fds[-1])
        slope = np.polyfit(np.log(hs[:-1]), np.log(errs), 1)[0]
        assert slope >= 0.9


class TestSolutionFieldAndVerify:
    def test_grid_field_passes_interface_check(self, rng):
        sys1 = random_system(rng, 2, 1, signs=[-1, 1])
        u0 = initial.gaussian([0.8, -0.3], center=0.0, width=1.0)
        zs = np.setdiff1d(np.linspace(-2, 2, 41), sys1.interfaces)
        ts = np.linspace(0.0, 1.5, 7)
        field = sample_on_grid(sys1, u0, zs, ts)
        rep = verify_interface(field, sys1)
        assert rep.max_residual <= 1e-10

    def test_zero_field_zero_residual(self):
        sys1 = piecewise_constant_system([np.diag([1.0, 2.0]), np.diag([2.0, 4.0])], [0.0])
        nt, n = 4, 2
        zs = np.array([-1.0, 1.0])
        ts = np.linspace(0, 1, nt)
        zeros = np.zeros((nt, zs.size, n))
        tr = np.zeros((1, nt, n))
        field = SolutionField(zs, ts, zeros, zeros.copy(), sys1.interfaces,
                              tr, tr.copy(), tr.copy(), tr.copy())
        assert verify_interface(field, sys1).max_residual == 0.0

    def test_u_continuity_is_not_the_condition(self):
        # u continuous across the interface but A jumps: the v-residual must
        # flag it (raw u-continuity is the wrong interface condition)
        B_minus = np.array([[0.0, 1.0], [4.0, 0.0]])
        B_plus = np.array([[0.0, 2.0], [2.0, 0.0]])
        sys1 = piecewise_constant_system([B_minus, B_plus], [0.0])
        nt = 3
        zs = np.array([-1.0, 1.0])
        ts = np.linspace(0, 1, nt)
        uval = np.array([1.0, 0.7])
        u = np.tile(uval, (nt, zs.size, 1))
        tr = np.tile(uval, (1, nt, 1)).reshape(1, nt, 2)
        field = SolutionField(zs, ts, u, u.copy(), sys1.interfaces,
                              tr, tr.copy(), tr.copy(), tr.copy())
        assert verify_interface(field, sys1).max_residual > 1e-3

    def test_grid_on_interface_rejected(self, rng):
        sys1 = piecewise_constant_system([[[2.0]], [[1.0]]], [0.0])
        u0 = identity_data()
        with pytest.raises(ValidationError):
            sample_on_grid(sys1, u0, np.linspace(-1, 1, 5), np.array([0.0, 1.0]))
