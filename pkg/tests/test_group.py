import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from equiorb.errors import ClosureOverflow, ValidationError
from equiorb.group import (
    FiniteGroup,
    GroupElement,
    Permutation,
    boundary_subgroups,
    build_problem,
    check_mass_compatibility,
    compose,
    group_closure,
    quotient_order,
)

from conftest import make_d6, rot2, small_groups


def el(M, cycles, n):
    return GroupElement(np.asarray(M, dtype=float), Permutation.from_cycles(cycles, n))


class TestPermutation:
    def test_cycle_parsing(self):
        p = Permutation.from_cycles("(1,2,3)", 3)
        assert [p(i) for i in range(3)] == [1, 2, 0]
        assert Permutation.from_cycles(" ( 1 , 2 ) ", 3) == Permutation.from_cycles("(1,2)", 3)
        assert Permutation.from_cycles("()", 4).is_identity()
        assert Permutation.from_cycles("", 4).is_identity()

    def test_product_of_disjoint_cycles(self):
        p = Permutation.from_cycles("(1,2)(3,4)", 4)
        assert p.to_cycles() == "(1,2)(3,4)"

    @pytest.mark.parametrize("text", ["(1,1)", "(0,1)", "(1,5)", "(1,2", "(a,b)", "(1,2)(2,3)"])
    def test_rejects_bad_cycles(self, text):
        with pytest.raises(ValueError):
            Permutation.from_cycles(text, 4)

    @given(st.permutations(list(range(6))))
    def test_inverse(self, images):
        p = Permutation(tuple(images))
        assert (p * p.inverse()).is_identity()
        assert Permutation.from_cycles(p.to_cycles(), 6) == p


class TestCompose:
    def test_identity(self):
        M = rot2(0.3)
        g = el(M, "(1,3)", 3)
        out = compose(GroupElement.identity(3, 2), g)
        assert out.same_action(g)

    def test_reflection_squares_to_identity(self):
        s = el(-np.eye(2), "(1,2)", 2)
        assert (s * s).is_identity()

    def test_rotation_cubed(self):
        r = el(np.eye(2), "(1,2,3)", 3)
        assert (r * r * r).is_identity()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compose(GroupElement.identity(3, 2), GroupElement.identity(2, 2))

    def test_action_is_homomorphism(self):
        rng = np.random.default_rng(0)
        a, b = el(rot2(1.0), "(1,2,3)", 3), el(np.diag([1.0, -1.0]), "(2,3)", 3)
        x = rng.normal(size=(3, 2))
        assert np.allclose((a * b).act(x), a.act(b.act(x)), atol=1e-14)
        assert np.allclose((a * b).config_matrix(), a.config_matrix() @ b.config_matrix(), atol=1e-14)

    def test_body_carried_to_sigma_slot(self):
        g = el(np.eye(2), "(1,2,3)", 3)
        x = np.array([[1.0, 0], [2, 0], [3, 0]])
        # body 1 moves to slot 2
        assert np.array_equal(g.act(x)[:, 0], [3.0, 1.0, 2.0])


class TestClosure:
    def test_d6_has_six_elements(self):
        G = group_closure([el(np.eye(2), "(1,2,3)", 3), el(-np.eye(2), "(1,2)", 3)])
        assert len(G) == 6

    def test_trivial(self):
        assert len(group_closure([GroupElement.identity(3, 2)])) == 1

    def test_rotation_by_pi(self):
        assert len(group_closure([el(-np.eye(2), "()", 2)])) == 2

    def test_overflow(self):
        with pytest.raises(ClosureOverflow):
            group_closure([el(rot2(1.0), "()", 2)], cap=500)

    def test_deterministic_order(self):
        gens = [el(np.eye(2), "(1,2,3)", 3), el(-np.eye(2), "(1,2)", 3)]
        a, b = group_closure(gens), group_closure(gens)
        assert all(x.same(y, 0.0) for x, y in zip(a, b))
        assert a.identity.is_identity()

    @settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
    @given(small_groups())
    def test_closure_properties(self, G):
        again = group_closure(G.elements)
        assert len(again) == len(G)
        assert all(g in again for g in G)
        for g in G:
            assert (g * g.inverse()).is_identity()
            for h in G.generators:
                assert (g * h) in G

    @settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
    @given(small_groups(), st.data())
    def test_lagrange(self, G, data):
        k = data.draw(st.integers(0, len(G) - 1))
        H = group_closure([G[k]])
        assert len(G) % len(H) == 0


class TestQuotientOrder:
    def test_examples(self):
        triv = group_closure([GroupElement.identity(3, 2)])
        assert quotient_order(el(np.eye(2), "(1,2,3)", 3), triv) == 3
        assert quotient_order(GroupElement.identity(3, 2), triv) == 1
        R = np.zeros((4, 4))
        R[:2, :2] = rot2(np.pi / 2)
        R[2:, 2:] = rot2(np.pi / 2)
        g = GroupElement(R, Permutation.identity(2))
        assert quotient_order(g, group_closure([GroupElement.identity(2, 4)])) == 4

    @settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
    @given(small_groups(), st.data())
    def test_matches_coset_count(self, G, data):
        # the central subgroup {+-Id} is normalised by everything, so the
        # quotient of <K, g> by K is cyclic of order |<K, g>| / |K|
        g = G[data.draw(st.integers(0, len(G) - 1))]
        K = group_closure([GroupElement(-np.eye(G.d), Permutation.identity(G.n))])
        big = group_closure([K.generators[0], g], cap=200)
        assert quotient_order(g, K) == len(big) // len(K)


class TestBoundarySubgroups:
    def test_d6(self):
        P = make_d6(F=2, S=8)
        assert len(P.H0) == len(P.H1) == 2
        assert P.H0[1].same_action(P.ref_gen)
        assert P.H1[1].same_action(P.rot_gen * P.ref_gen)
        assert P.m == 6

    def test_cyclic_trivial_kernel(self):
        P = build_problem(3, 2, [1, 1, 1], "cyclic", (rot2(2 * np.pi / 3), "(1,2,3)"), F=2, S=8)
        assert len(P.H0) == len(P.H1) == 1
        assert P.m == 3

    def test_brake(self):
        s = el(-np.eye(2), "(1,2)", 2)
        ident = GroupElement.identity(2, 2)
        K = group_closure([ident])
        H0, H1 = boundary_subgroups("brake", K, ident, s)
        assert len(H0) == len(H1) == 2

    def test_brake_problem(self):
        P = build_problem(2, 2, [1, 1], "brake", (np.eye(2), "()"), (-np.eye(2), "(1,2)"), F=2, S=8)
        assert P.m == 2 and len(P.H0) == 2

    @settings(max_examples=25, deadline=None)
    @given(st.sampled_from(["cyclic", "dihedral"]), st.integers(1, 6))
    def test_kernel_contained(self, kind, q):
        ref = (np.diag([1.0, -1.0]), "()") if kind == "dihedral" else None
        P = build_problem(2, 2, [1, 1], kind, (rot2(2 * np.pi / q), "()"), ref,
                          kernel_generators=[(-np.eye(2), "()")] if q % 2 == 0 else [], F=2, S=8)
        assert P.kernel.is_subgroup_of(P.H0) and P.kernel.is_subgroup_of(P.H1)
        assert len(P.group) % len(P.kernel) == 0


class TestMassCompatibility:
    def test_d6_equal_masses(self):
        G = make_d6(F=2, S=8).group
        assert check_mass_compatibility([1, 1, 1], G) is None

    def test_identity_group(self):
        G = group_closure([GroupElement.identity(3, 2)])
        assert check_mass_compatibility([1, 2, 3], G) is None

    def test_violation(self):
        G = group_closure([el(np.eye(2), "(1,2)", 3)])
        v = check_mass_compatibility([1, 2, 1], G)
        assert v is not None and {v.i, v.j} == {0, 1}

    def test_build_problem_reports_violation(self):
        with pytest.raises(ValidationError, match="mass"):
            build_problem(3, 2, [1, 2, 1], "cyclic", (np.eye(2), "(1,2)"), F=2, S=8)


class TestBuildProblem:
    def test_lists_every_failure(self):
        with pytest.raises(ValidationError) as info:
            build_problem(3, 2, [1, -1, 1], "cyclic", (np.ones((2, 2)), "(1,2,3)"),
                          Omega=[[0, 1], [1, 0]], F=2)
        text = " ".join(info.value.failures)
        assert "masses" in text and "antisymmetric" in text and "orthogonal" in text

    def test_missing_reflection(self):
        with pytest.raises(ValidationError, match="reflection"):
            build_problem(3, 2, [1, 1, 1], "dihedral", (np.eye(2), "(1,2,3)"), F=2)

    def test_brake_rotation_outside_kernel(self):
        with pytest.raises(ValidationError, match="brake"):
            build_problem(2, 2, [1, 1], "brake", (-np.eye(2), "()"), (np.diag([1.0, -1.0]), "()"), F=2)

    def test_kernel_not_normalised(self):
        with pytest.raises(ValidationError, match="normalised"):
            build_problem(3, 2, [1, 1, 1], "cyclic", (np.eye(2), "(1,2,3)"),
                          kernel_generators=[(np.eye(2), "(1,2)")], F=2)

    def test_frozen_problem(self):
        P = make_d6(F=2, S=8)
        with pytest.raises(Exception):
            P.F = 3
        assert isinstance(P.group, FiniteGroup)
        assert P.ncoeff == 4 * 2 * 2
