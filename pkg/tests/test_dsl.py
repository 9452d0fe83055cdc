"""Parsing, index discipline, rendering, and evaluation of the expression DSL."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlab.dsl import (
    EvaluationError,
    ExpressionSyntaxError,
    Index,
    IndexUsageError,
    evaluate,
    evaluate_program,
    parse,
    parse_program,
    render,
)
from eqlab.geometry import curvature_R, random_connection
from eqlab.jets import OrderExhaustedError, jet_partial
from eqlab.mapping import random_jet
from eqlab.tensors import DOWN, UP, TensorField, tensor_scale, transpose

CURVATURE_SRC = ("d(Gamma[^i,_j,_m],_n) - d(Gamma[^i,_j,_n],_m)"
                 " + Gamma[^a,_j,_m]*Gamma[^i,_a,_n]"
                 " - Gamma[^a,_j,_n]*Gamma[^i,_a,_m]")

seeds = st.integers(min_value=0, max_value=10**6)


def random_field(dim: int, valence, order: int, seed: int) -> TensorField:
    rng = random.Random(seed)
    return TensorField.build(dim, valence, order,
                             lambda idx: random_jet(rng, dim, order))


class TestParse:
    def test_single_reference_signature(self):
        plan = parse("Gamma[^i,_j,_k]")
        assert plan.free == (Index(UP, "i"), Index(DOWN, "j"), Index(DOWN, "k"))

    def test_product_binds_repeated_name(self):
        plan = parse("Gamma[^a,_j,_m]*Gamma[^i,_a,_n]")
        assert [i.name for i in plan.free] == ["j", "m", "i", "n"]

    def test_trace_within_one_reference(self):
        plan = parse("Gamma[^a,_j,_a]")
        assert plan.free == (Index(DOWN, "j"),)

    def test_derivative_appends_covariant_slot(self):
        plan = parse("d(Gamma[^i,_j,_m],_n)")
        assert [str(i) for i in plan.free] == ["^i", "_j", "_m", "_n"]

    def test_rational_literal(self):
        plan = parse("1/2 * T[^i]")
        assert plan.free == (Index(UP, "i"),)

    def test_syntax_error_carries_position(self):
        with pytest.raises(ExpressionSyntaxError) as excinfo:
            parse("Gamma[^i,_j,_k] + @")
        assert excinfo.value.position == 18

    def test_unclosed_bracket(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("T[^i")

    def test_zero_denominator(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("1/0")

    def test_index_appearing_three_times(self):
        with pytest.raises(IndexUsageError):
            parse("T[^a] * S[_a] * U[^a]")

    def test_same_variance_repeat(self):
        with pytest.raises(IndexUsageError):
            parse("T[^a] * S[^a]")

    def test_summand_order_mismatch(self):
        with pytest.raises(IndexUsageError):
            parse("T[^i,_j] + S[_j,^i]")

    def test_summand_name_mismatch(self):
        with pytest.raises(IndexUsageError):
            parse("T[^i,_j] + S[^i,_k]")

    def test_dummy_reuse_across_summands_is_fine(self):
        plan = parse("A[^a,_a,_j] + B[^a,_a,_j]")
        assert plan.free == (Index(DOWN, "j"),)

    def test_curvature_signature(self):
        plan = parse(CURVATURE_SRC)
        assert [str(i) for i in plan.free] == ["^i", "_j", "_m", "_n"]


class TestRender:
    @pytest.mark.parametrize("src", [
        "Gamma[^i,_j,_k]",
        "1/2 * T[^i] + 3 * S[^i]",
        "(A[^i] + B[^i]) * C[_i]",
        "d(Gamma[^i,_j,_m],_n) - d(Gamma[^i,_j,_n],_m)",
        "d(A[^i] + B[^i], _j)",
        CURVATURE_SRC,
    ])
    def test_round_trip(self, src: str):
        plan = parse(src)
        again = parse(render(plan))
        assert again == plan


class TestEvaluate:
    def test_delta_is_autobound(self):
        anchor = random_field(3, (UP,), 2, 1)
        result = evaluate(parse("delta[^i,_j]"), {"T": anchor})
        assert result == TensorField.delta(3, 2)

    def test_zero_literal_annihilates(self):
        t = random_field(2, (UP, DOWN), 2, 2)
        result = evaluate(parse("0 * T[^i,_j]"), {"T": t})
        assert result.is_zero()

    def test_scalar_scaling(self):
        t = random_field(2, (UP,), 2, 3)
        result = evaluate(parse("2/3 * T[^i]"), {"T": t})
        assert result == tensor_scale(Fraction(2, 3), t)

    def test_full_contraction_gives_scalar(self):
        t = random_field(2, (UP, DOWN), 2, 4)
        result = evaluate(parse("T[^a,_a]"), {"T": t})
        assert result.valence == ()
        assert result[()] == t[0, 0] + t[1, 1]

    def test_derivative_is_comma(self):
        t = random_field(2, (UP,), 2, 5)
        result = evaluate(parse("d(T[^i],_j)"), {"T": t})
        for i in range(2):
            for j in range(2):
                assert result[i, j] == jet_partial(t[i], j)

    def test_summand_alignment_by_name(self):
        t = random_field(2, (UP, DOWN), 3, 6)
        plan = parse("d(T[^i,_m],_n) + d(T[^i,_n],_m)")
        result = evaluate(plan, {"T": t})
        for i in range(2):
            for m in range(2):
                for n in range(2):
                    expected = jet_partial(t[i, m], n) + jet_partial(t[i, n], m)
                    assert result[i, m, n] == expected

    @given(seed=seeds)
    @settings(max_examples=10, deadline=None)
    def test_curvature_formula_matches_builtin(self, seed: int):
        s = random_connection(3, 2, seed, torsion_free=True)
        built_in = curvature_R(s)
        via_dsl = evaluate(parse(CURVATURE_SRC), {"Gamma": s.gamma})
        assert via_dsl == built_in

    @given(seed=seeds)
    @settings(max_examples=10, deadline=None)
    def test_dummy_renaming_invariance(self, seed: int):
        t = random_field(3, (UP, DOWN, DOWN), 2, seed)
        u = random_field(3, (UP, DOWN, DOWN), 2, seed + 1)
        bindings = {"T": t, "U": u}
        original = evaluate(parse("T[^a,_j,_m]*U[^i,_a,_n]"), bindings)
        renamed = evaluate(parse("T[^zz,_j,_m]*U[^i,_zz,_n]"), bindings)
        assert renamed == original

    def test_unbound_name(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("Missing[^i]"), {})

    def test_valence_mismatch(self):
        t = random_field(2, (UP, DOWN), 2, 7)
        with pytest.raises(EvaluationError):
            evaluate(parse("T[_i,^j]"), {"T": t})

    def test_derivative_order_exhaustion(self):
        t = random_field(2, (UP,), 0, 8)
        with pytest.raises(OrderExhaustedError):
            evaluate(parse("d(T[^i],_j)"), {"T": t})

    def test_bindings_must_share_dimension(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("T[^i] + S[^i]"),
                     {"T": random_field(2, (UP,), 2, 9),
                      "S": random_field(3, (UP,), 2, 10)})

    def test_pure_literal_needs_dim_hint(self):
        plan = parse("1/2 + 1/3")
        with pytest.raises(EvaluationError):
            evaluate(plan, {})
        result = evaluate(plan, {}, dim=2, order=1)
        assert result.valence == ()
        assert result[()].coeffs[(0, 0)] == Fraction(5, 6)


class TestPrograms:
    def test_two_line_program_with_reference(self):
        t = random_field(2, (UP, DOWN), 2, 11)
        src = """
        # comment line
        Twice[^i,_j] = 2 * T[^i,_j]
        Traced = Twice[^a,_a]
        """
        out = evaluate_program(src, {"T": t})
        assert set(out) == {"Twice", "Traced"}
        assert out["Twice"] == tensor_scale(2, t)
        assert out["Traced"][()] == out["Twice"][0, 0] + out["Twice"][1, 1]

    def test_left_hand_side_reorders_slots(self):
        t = random_field(2, (UP, DOWN), 2, 12)
        out = evaluate_program("Flipped[_j,^i] = T[^i,_j]", {"T": t})
        assert out["Flipped"] == transpose(t, (1, 0))

    def test_left_hand_indices_must_match_free(self):
        with pytest.raises(IndexUsageError):
            parse_program("Bad[^i,_k] = T[^i,_j]")

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(ExpressionSyntaxError) as excinfo:
            parse_program("Good[^i] = T[^i]\nnot an assignment")
        assert excinfo.value.line == 2

    def test_repeated_lhs_index_rejected(self):
        with pytest.raises(ExpressionSyntaxError):
            parse_program("Bad[^i,_i] = T[^i] * S[_i]")
