import json
import math
from importlib import resources

import jsonschema
import numpy as np
import pytest

from localexp.bounds import (THEOREMS, ComplexityBound, combine, confidence_term, lemma1_complexity_term,
                             measured_alpha, rademacher_star_linear, theorem1_rhs, theorem2_rhs,
                             theorem_alt_g_rhs)
from localexp.rho import RhoEstimate

SCHEMA = json.loads(resources.files("localexp").joinpath("schemas/bound_report.schema.json").read_text())
RHO = RhoEstimate(2.5, "monte-carlo", 100, 1000, 0.01, 0.2, 0.01)


def reports():
    r = rademacher_star_linear(np.ones((100, 2)), 2.0)
    return [
        theorem1_rhs(0.1, 0.2, 0.05, 3.0, RHO, r, 100, 0.05),
        theorem2_rhs(0.07, 3.0, RHO, r, 100, 0.05),
        theorem_alt_g_rhs(0.1, 0.05, 3.0, RHO, r, 100, 0.05),
    ]


class TestComplexity:
    def test_closed_form(self):
        X = np.array([[3.0, 4.0], [0.0, 1.0]])
        c = rademacher_star_linear(X, 0.5)
        assert c.max_norm == pytest.approx(math.sqrt(26))
        assert c.r_star == pytest.approx(0.5 * math.sqrt(26) / math.sqrt(2))

    def test_lemma_term(self):
        assert lemma1_complexity_term(4.0, 2.0, 0.25, 10) == pytest.approx(4 * 2 * 0.25 * (math.log(10) + 1))

    def test_measured_alpha_skips_nan_rows(self):
        assert measured_alpha([[3.0, 4.0], [np.nan, 0.0], [1.0, 0.0]]) == 5.0
        with pytest.raises(ValueError):
            measured_alpha([[np.nan]])

    def test_confidence(self):
        assert confidence_term(100, math.exp(-4)) == pytest.approx(0.2)
        with pytest.raises(ValueError):
            confidence_term(10, 0.0)


class TestReports:
    def test_rhs_recomputes(self):
        for rep in reports():
            assert abs(rep.rhs - rep.recompute_rhs()) <= 1e-12
            manual = sum(THEOREMS[rep.theorem].get(k, 0.0) * v for k, v in rep.terms.items()
                         if k not in ("complexityTerm", "confidenceTerm"))
            assert abs(rep.rhs - manual - rep.terms["complexityTerm"] - rep.terms["confidenceTerm"]) <= 1e-12

    def test_theorem1_arithmetic(self):
        r = ComplexityBound(1.0, 1.0, 50, 0.1)
        rep = theorem1_rhs(1.0, 2.0, 3.0, 1.5, 2.0, r, 50, 0.1)
        expect = 4 + 4 + 12 + 16 * 1.5 * 2.0 * 0.1 * (math.log(50) + 1) + 2 * math.sqrt(math.log(10) / 50)
        assert rep.rhs == pytest.approx(expect, rel=1e-14)

    def test_theorem2_and_alt_arithmetic(self):
        r = ComplexityBound(1.0, 1.0, 50, 0.1)
        cplx = 8 * 1.5 * 2.0 * 0.1 * (math.log(50) + 1)
        conf = math.sqrt(math.log(10) / 50)
        assert theorem2_rhs(0.5, 1.5, 2.0, r, 50, 0.1).rhs == pytest.approx(0.5 + cplx + conf, rel=1e-14)
        assert theorem_alt_g_rhs(1.0, 3.0, 1.5, 2.0, r, 50, 0.1).rhs == pytest.approx(2 + 6 + cplx + conf, rel=1e-14)

    @pytest.mark.parametrize("which", range(3))
    def test_monotone_in_every_input(self, which):
        r = ComplexityBound(1.0, 1.0, 100, 0.2)
        builders = [
            lambda a, b, c, B, rho, rs: theorem1_rhs(a, b, c, B, rho, rs, 100, 0.05),
            lambda a, b, c, B, rho, rs: theorem2_rhs(a, B, rho, rs, 100, 0.05),
            lambda a, b, c, B, rho, rs: theorem_alt_g_rhs(a, c, B, rho, rs, 100, 0.05),
        ]
        base = dict(a=0.3, b=0.2, c=0.1, B=2.0, rho=1.5, rs=r)
        ref = builders[which](**base).rhs
        for key in base:
            bumped = dict(base)
            bumped[key] = ComplexityBound(1.0, 1.0, 100, 0.25) if key == "rs" else base[key] + 0.01
            assert builders[which](**bumped).rhs >= ref

    def test_rejects_bad_inputs(self):
        r = ComplexityBound(1.0, 1.0, 10, 0.1)
        with pytest.raises(ValueError):
            theorem2_rhs(-0.1, 1.0, 1.0, r, 10, 0.05)
        with pytest.raises(ValueError):
            theorem2_rhs(0.1, 0.0, 1.0, r, 10, 0.05)
        with pytest.raises(ValueError):
            theorem2_rhs(float("nan"), 1.0, 1.0, r, 10, 0.05)
        with pytest.raises(ValueError):
            theorem2_rhs(0.1, 1.0, 1.0, r, 10, 1.5)

    def test_holds(self):
        rep = reports()[1]
        rep.lhs_estimate, rep.lhs_std_error = rep.rhs + 0.3, 0.1
        assert rep.holds()
        rep.lhs_std_error = 0.09
        assert not rep.holds()

    def test_json_matches_schema(self):
        for rep in reports():
            doc = json.loads(rep.to_json())
            jsonschema.validate(doc, SCHEMA)
            assert doc["verdict"] is None
            rep.lhs_estimate, rep.lhs_std_error = 0.1, 0.01
            doc = json.loads(rep.to_json())
            jsonschema.validate(doc, SCHEMA)
            assert doc["verdict"] is True
            assert doc["provenance"]["complexity"]["alpha"] == 2.0

    def test_combine_from_stored_terms(self):
        for rep in reports():
            doc = json.loads(rep.to_json())
            assert combine(doc["theorem"], doc["terms"]) == pytest.approx(doc["rhs"], abs=1e-12)
