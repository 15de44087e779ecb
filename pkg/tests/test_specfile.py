import os
from fractions import Fraction

import numpy as np
import pytest

from mobiusdual import load_model, parse_spec, serialize_chain, serialize_poset
from mobiusdual.chain import Chain
from mobiusdual.cube import CubeWalkParams
from mobiusdual.errors import NotStochastic, SchemaError
from mobiusdual.poset import Poset
from mobiusdual.availability import RateFunctions
from mobiusdual.specfile import cover_pairs, fmt, load_model_text, serialize_dual

DATA = os.path.join(os.path.dirname(__file__), "data")


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


DIAMOND_CHAIN = """
[poset]
states: a b c d
cover: a b
cover: a c
cover: b d
cover: c d

[chain]
row: 0.6 0.2 0.2 0
row: 0.2 0.6 0 0.2
row: 1/5 0 3/5 1/5
row: 0 0.2 0.2 0.6
nu: delta_min
"""


class TestParsing:
    def test_poset_only(self, tmp_path):
        path = write(tmp_path, "p.spec", "[poset]\nstates: x y\ncover: x y\n")
        p = parse_spec(path)
        assert isinstance(p, Poset)
        assert p.elements == ("x", "y")

    def test_chain_spec(self, tmp_path):
        path = write(tmp_path, "c.spec", DIAMOND_CHAIN)
        c = parse_spec(path)
        assert isinstance(c, Chain)
        assert c.nu is not None and c.nu[0] == 1.0
        assert c.P[2, 2] == pytest.approx(0.6)

    def test_rational_tokens_parsed_exactly(self, tmp_path):
        path = write(tmp_path, "c.spec", DIAMOND_CHAIN)
        loaded = load_model(path)
        assert loaded.exact_rows[2][0] == Fraction(1, 5)
        assert loaded.chain.P[2, 0] == pytest.approx(0.2)

    def test_rows_follow_states_line_order(self, tmp_path):
        # list states against the topological order; the parser must permute
        text = """
[poset]
states: top bottom
cover: bottom top

[chain]
row: 0.9 0.1
row: 0.4 0.6
"""
        path = write(tmp_path, "c.spec", text)
        c = parse_spec(path)
        assert c.poset.elements == ("bottom", "top")
        # row for 'bottom' is the second file row, diagonal first
        assert c.P[0, 0] == pytest.approx(0.6)
        assert c.P[1, 1] == pytest.approx(0.9)

    def test_cube_spec(self):
        params = parse_spec(os.path.join(DATA, "two_cube.spec"))
        assert isinstance(params, CubeWalkParams)
        assert params.alpha == (0.2, 0.2)
        assert params.beta == (0.2, 0.2)

    def test_rates_spec(self):
        rates = parse_spec(os.path.join(DATA, "rates.spec"))
        assert isinstance(rates, RateFunctions)
        assert rates.psi[3] == pytest.approx(0.03 * 0.05)

    def test_rates_table_overrides_family(self, tmp_path):
        text = "[rates]\nd: 1\npsi: power 0.5\npsi[1]: 0.25\nphi: power 2\n"
        path = write(tmp_path, "r.spec", text)
        rates = parse_spec(path)
        assert rates.psi[1] == pytest.approx(0.25)

    def test_poset_file_reference(self, tmp_path):
        write(tmp_path, "p.spec", "[poset]\nstates: x y\ncover: x y\n")
        path = write(
            tmp_path,
            "c.spec",
            "[chain]\nposet_file: p.spec\nrow: 0.7 0.3\nrow: 0.4 0.6\n",
        )
        c = parse_spec(path)
        assert c.poset.elements == ("x", "y")
        assert c.P[0, 1] == pytest.approx(0.3)


class TestSchemaErrors:
    def test_unknown_section(self, tmp_path):
        path = write(tmp_path, "s.spec", "[nonsense]\nd: 2\n")
        with pytest.raises(SchemaError):
            parse_spec(path)

    def test_unknown_key_carries_line(self, tmp_path):
        path = write(tmp_path, "s.spec", "[poset]\nstates: a\nwhat: 3\n")
        with pytest.raises(SchemaError) as exc:
            parse_spec(path)
        assert exc.value.line == 3

    def test_dense_matrix_and_generator_are_ambiguous(self, tmp_path):
        text = DIAMOND_CHAIN + "\n[cube]\nd: 2\nalpha: 0.1 0.1\nbeta: 0.1 0.1\n"
        path = write(tmp_path, "s.spec", text)
        with pytest.raises(SchemaError) as exc:
            parse_spec(path)
        assert "ambiguous" in str(exc.value)

    def test_wrong_row_count(self, tmp_path):
        path = write(
            tmp_path, "s.spec",
            "[poset]\nstates: x y\ncover: x y\n\n[chain]\nrow: 1 0\n",
        )
        with pytest.raises(SchemaError):
            parse_spec(path)

    def test_bad_number(self, tmp_path):
        path = write(
            tmp_path, "s.spec",
            "[poset]\nstates: x y\n\n[chain]\nrow: one 0\nrow: 0 1\n",
        )
        with pytest.raises(SchemaError) as exc:
            parse_spec(path)
        assert exc.value.line == 5

    def test_bad_row_sum_is_not_schema_error(self):
        with pytest.raises(NotStochastic) as exc:
            parse_spec(os.path.join(DATA, "bad_row.spec"))
        assert any(row == 0 for row, _ in exc.value.violations)

    def test_content_before_section(self, tmp_path):
        path = write(tmp_path, "s.spec", "states: a\n")
        with pytest.raises(SchemaError):
            parse_spec(path)


class TestRoundTrip:
    def test_poset_round_trip(self, tmp_path):
        path = write(tmp_path, "p.spec", "[poset]\nstates: a b c d\ncover: a b\ncover: a c\ncover: b d\ncover: c d\n")
        p = parse_spec(path)
        text = serialize_poset(p)
        p2 = load_model_text(text).primary
        assert p2.elements == p.elements
        assert (p2.leq == p.leq).all()

    def test_chain_round_trip(self, tmp_path):
        path = write(tmp_path, "c.spec", DIAMOND_CHAIN)
        c = parse_spec(path)
        text = serialize_chain(c)
        c2 = load_model_text(text).primary
        assert c2.poset.elements == c.poset.elements
        assert np.array_equal(c2.P, c.P)
        assert np.array_equal(c2.nu, c.nu)

    def test_seventeen_digit_round_trip(self):
        values = [1 / 3, 0.1 + 0.2, 1e-17, 123456.789012345678]
        for v in values:
            assert float(fmt(v)) == v

    def test_cover_pairs_are_transitive_reduction(self, tmp_path):
        path = write(
            tmp_path, "p.spec",
            "[poset]\nstates: x y z\ncover: x y\ncover: y z\ncover: x z\n",
        )
        p = parse_spec(path)
        pairs = set(cover_pairs(p))
        assert pairs == {("x", "y"), ("y", "z")}

    def test_dual_serialization_reparses_as_chain(self):
        import mobiusdual as md

        params = md.CubeWalkParams(d=2, alpha=(0.1, 0.1), beta=(0.1, 0.1))
        nu = np.zeros(4)
        nu[0] = 1.0
        c = md.nearest_neighbor_walk(params, nu=nu)
        law = md.stationary(c)
        zm = md.zeta_mobius(c.poset)
        dual = md.build_ssd(c, law, zm, "down")
        text = serialize_dual(dual, c.poset)
        loaded = load_model_text(text)
        assert loaded.kind == "chain"
        assert np.abs(loaded.chain.P - dual.P_star).max() < 1e-16
        assert "absorbing_state: 11" in text
        assert "direction: down" in text
