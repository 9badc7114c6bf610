"""Tests for closed sets, Lyapunov certificates and the trajectory-based stability checks."""

import math

import numpy as np
import pytest

from hybridzeno.helpers.prolongation import estimate_omega
from hybridzeno.helpers.sampling import box_samples
from hybridzeno.helpers.scenarios import builtin_scenario
from hybridzeno.helpers.simulator import SimConfig, simulate
from hybridzeno.helpers import stability
from hybridzeno.helpers.spec_lang import SchemaError, compile_expr
from hybridzeno.helpers.stability import (
    BudgetExceeded,
    ChainNotNested,
    ClosedSetSpec,
    ComparisonFn,
    LyapunovCertificate,
    NegativeDistance,
    SampleError,
    check_attractivity,
    check_lyapunov,
    check_sfpi,
    check_ugs_envelope,
    distance,
    finite_difference_gradient,
    restrict_system,
    sequential_narrowing,
    symbolic_gradient,
)

from .conftest import EXAMPLE3_BOUNDS, G, a1_set_document, origin_set_document, quadratic_certificate_document

BALL_BOUNDS = [(0.0, 5.0), (-10.0, 10.0)]


def closed_set(document, dim):
    return ClosedSetSpec.from_texts(
        document["set_membership"], document["set_distance"], dim=dim, name=document["name"]
    )


def certificate(document, dim):
    return LyapunovCertificate.from_document(document, dim=dim)


class TestClosedSets:
    def test_distance(self):
        a1 = closed_set(a1_set_document(), 3)
        assert distance(a1, [3.0, 4.0, 7.0]) == pytest.approx(5.0)
        assert a1.contains([0.0, 0.0, 7.0])
        assert not a1.contains([0.0, 1e-6, 7.0])

    def test_negative_distance(self):
        bad = ClosedSetSpec.from_texts("x1 == 0", "x1", dim=1)
        with pytest.raises(NegativeDistance):
            bad.distance([-1.0])
        with pytest.raises(NegativeDistance):
            bad.distance_batch([[1.0], [-1.0]])

    def test_inconsistent_points(self):
        offset = ClosedSetSpec.from_texts("x1 == 0", "abs(x1) + 1", dim=1)
        assert offset.inconsistent_points([[0.0], [2.0]]).tolist() == [0]
        origin = closed_set(origin_set_document(2), 2)
        assert origin.inconsistent_points([[0.0, 0.0], [1.0, 2.0]]).tolist() == []

    def test_membership_must_be_boolean(self):
        with pytest.raises(SchemaError):
            ClosedSetSpec.from_texts("x1", "abs(x1)", dim=1)


class TestComparisonFunctions:
    @pytest.mark.parametrize("text, kind", [
        ("s^2", "kinf"),
        ("0.75*s^2 + 1.5*g*s", "kinf"),
        ("s", "pd"),
        ("0.15*min(s^2, 2*g*s)/(1 + s^2)", "pd"),
    ])
    def test_valid(self, text, kind):
        assert ComparisonFn.from_text(text, kind, params={"g": G}).validate() == []

    @pytest.mark.parametrize("text, kind", [
        ("1 + s", "kinf"),
        ("-s", "kinf"),
        ("min(s, 1)", "kinf"),
        ("s*(s - 1)", "pd"),
    ])
    def test_invalid(self, text, kind):
        assert ComparisonFn.from_text(text, kind).validate() != []

    def test_vectorized_call(self):
        fn = ComparisonFn.from_text("s^2", "kinf")
        assert fn([1.0, 2.0]).tolist() == [1.0, 4.0]
        assert fn(3.0).tolist() == [9.0]

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ComparisonFn.from_text("s", "class-l")


class TestCertificates:
    def test_document_round_trip(self, ball_cert_doc):
        cert = certificate(ball_cert_doc, 2)
        again = certificate(cert.to_document(), 2)
        assert again.V == cert.V
        assert again.target.name == "A1"
        assert again.params == cert.params

    def test_missing_field(self, ball_cert_doc):
        del ball_cert_doc["rho"]
        with pytest.raises(SchemaError):
            certificate(ball_cert_doc, 2)

    def test_symbolic_gradient_matches_finite_differences(self, ball_cert_doc):
        cert = certificate(ball_cert_doc, 2)
        points = box_samples(BALL_BOUNDS, 200, pin_zero=False)
        np.testing.assert_allclose(
            symbolic_gradient(cert.V, points, params=cert.params),
            finite_difference_gradient(cert.V, points, params=cert.params),
            rtol=1e-6,
            atol=1e-6,
        )

    def test_example3_gradient_at_random_points(self, ball_cert_doc):
        cert = certificate(ball_cert_doc, 3)
        points = np.random.default_rng(3).uniform([0.0, -10.0, -5.0], [5.0, 10.0, 5.0], size=(100, 3))
        exact = symbolic_gradient(cert.V, points, params=cert.params)
        approx = finite_difference_gradient(cert.V, points, params=cert.params, step=1e-5)
        errors = np.linalg.norm(exact - approx, axis=1) / np.linalg.norm(exact, axis=1)
        assert errors.max() <= 1e-6


class TestLyapunov:
    def test_ball_certificate_on_ball(self, ball, ball_cert_doc):
        report = check_lyapunov(ball, certificate(ball_cert_doc, 2), box_samples(BALL_BOUNDS, 4000))
        assert report.passed, report.counterexamples
        assert report.n_points["jump"] > 0
        assert report.set_inconsistencies == 0

    def test_ball_certificate_on_example3(self, example3, ball_cert_doc):
        report = check_lyapunov(example3, certificate(ball_cert_doc, 3), box_samples(EXAMPLE3_BOUNDS, 10000))
        assert report.passed, report.counterexamples
        assert all(m >= -1e-9 for m in report.margins.values())

    def test_quadratic_on_decay(self, decay):
        report = check_lyapunov(decay, certificate(quadratic_certificate_document(1), 1), box_samples([(-5.0, 5.0)], 500))
        assert report.passed
        assert report.margins["jump_decrease"] is None
        assert report.n_points["jump"] == 0

    def test_quadratic_on_growth_fails(self, growth):
        report = check_lyapunov(growth, certificate(quadratic_certificate_document(1), 1), box_samples([(-5.0, 5.0)], 500))
        assert not report.passed
        assert report.margins["flow_decrease"] < 0
        assert report.counterexamples["flow_decrease"]
        assert report.margins["lower_bound"] >= -1e-9

    def test_bad_comparison_function_fails(self, decay):
        document = quadratic_certificate_document(1)
        document["alpha1"] = "min(s, 1)"
        report = check_lyapunov(decay, certificate(document, 1), box_samples([(-5.0, 5.0)], 100))
        assert not report.passed
        assert "alpha1" in report.comparison_problems

    def test_sample_shape_checked(self, ball, ball_cert_doc):
        with pytest.raises(ValueError):
            check_lyapunov(ball, certificate(ball_cert_doc, 2), np.zeros((4, 3)))

    def test_v_decreases_along_example3(self, example3, ball_cert_doc, cfg):
        cert = certificate(ball_cert_doc, 3)
        V = compile_expr(cert.V, cert.params, vectorized=True)
        run = simulate(example3, [1.0, 0.0, 1.0], cfg)
        for seg in run.segments:
            values = V(seg.states.T)
            assert np.all(np.diff(values) <= 1e-9)
        for ev in run.jumps:
            assert V(ev.post.reshape(-1, 1))[0] < V(ev.pre.reshape(-1, 1))[0]

    def test_restricted_system_has_no_jumps_on_samples(self, example3):
        a1 = closed_set(a1_set_document(), 3)
        restricted = restrict_system(example3, a1)
        assert restricted.name == "example3&A1"
        points = box_samples(EXAMPLE3_BOUNDS, 1000)
        assert not restricted.in_jump_set_batch(points).any()
        assert restricted.in_flow_set_batch(points).any()


class TestInvariance:
    def test_ball_origin_is_invariant(self, ball):
        report = check_sfpi(ball, closed_set(a1_set_document(), 2), [[0.0, 0.0], [1.0, 0.0]], SimConfig(horizon=2.0))
        assert report.passed
        assert report.n_samples == 1
        assert report.max_distance == 0.0

    def test_two_balls_origin_is_invariant(self, two_balls):
        report = check_sfpi(two_balls, closed_set(origin_set_document(4), 4), [[0.0] * 4], SimConfig(horizon=2.0))
        assert report.passed

    def test_half_line_is_not_invariant(self, ball):
        below = ClosedSetSpec.from_texts("x1 <= 1", "max(x1 - 1, 0)", dim=2, name="below")
        report = check_sfpi(ball, below, [[1.0, 1.0]], SimConfig(horizon=3.0))
        assert not report.passed
        assert report.max_distance == pytest.approx(1.0 / (2.0 * G), abs=1e-4)
        assert report.witness["sample"] == [1.0, 1.0]

    def test_omega_points_lie_in_a1(self, example3, cfg):
        a1 = closed_set(a1_set_document(), 3)
        omega = estimate_omega(simulate(example3, [1.0, 0.0, 1.0], cfg))
        assert all(a1.distance(p) <= 1e-3 for p in omega.points)


class TestAttractivity:
    def test_decay(self, decay):
        origin = closed_set(origin_set_document(1), 1)
        report = check_attractivity(decay, origin, [[1.0], [0.5], [-1.0]], eps=0.05, r=1.0)
        assert report.passed
        assert report.K == 0
        assert report.T == pytest.approx(math.log(20.0), abs=2e-3)
        assert report.n_samples == 3

    def test_short_paths_constrain_only_their_last_level(self, decay, monkeypatch):
        short_path = {"late": {0: 50.0}, "sup_zeno": 1, "status": "Horizon", "final_outside": False, "witness": None}
        long_path = {"late": {2: 4.0}, "sup_zeno": 3, "status": "Horizon", "final_outside": False, "witness": None}
        monkeypatch.setattr(stability, "_path_profiles", lambda x0, **kwargs: [short_path, long_path])
        origin = closed_set(origin_set_document(1), 1)
        report = check_attractivity(decay, origin, [[0.5]], eps=0.05, r=1.0, mode="extended", max_zeno=3)
        assert report.passed
        assert report.K == 2
        assert report.T == pytest.approx(4.001)

    def test_horizon_too_short(self, decay):
        origin = closed_set(origin_set_document(1), 1)
        with pytest.raises(BudgetExceeded):
            check_attractivity(decay, origin, [[1.0]], eps=0.05, r=1.0, cfg=SimConfig(horizon=1.0))

    def test_no_samples_within_r(self, decay):
        origin = closed_set(origin_set_document(1), 1)
        with pytest.raises(SampleError):
            check_attractivity(decay, origin, [[3.0]], eps=0.05, r=1.0)

    def test_two_balls_classical_fails(self, two_balls):
        origin = closed_set(origin_set_document(4), 4)
        report = check_attractivity(
            two_balls, origin, [[3.0, 0.0, 1.0, 0.0]], eps=0.05, r=4.0, cfg=SimConfig(horizon=4.0)
        )
        assert not report.passed
        assert report.witness is not None

    def test_two_balls_extended(self, two_balls):
        origin = closed_set(origin_set_document(4), 4)
        report = check_attractivity(
            two_balls, origin, [[3.0, 0.0, 1.0, 0.0]], eps=0.05, r=4.0,
            cfg=SimConfig(horizon=4.0), mode="extended",
        )
        assert report.passed
        assert report.K == 1


class TestUgsEnvelope:
    def test_ball_envelope(self, ball):
        radii = [0.01, 0.1, 1.0]
        report = check_ugs_envelope(
            ball, closed_set(a1_set_document(), 2), radii,
            unit_bounds=[(0.0, 1.0), (-1.0, 1.0)], samples_per_radius=8, cfg=SimConfig(horizon=3.0),
        )
        assert report.passed, report.notes
        assert report.slope > 0
        for r, m in zip(radii, report.envelope):
            assert m <= math.sqrt(r * r + 2.0 * G * r) * (1 + 1e-6)
        assert report.envelope == sorted(report.envelope)

    def test_growth_diverges(self, growth):
        report = check_ugs_envelope(
            growth, closed_set(origin_set_document(1), 1), [0.1, 1.0],
            unit_bounds=[(-1.0, 1.0)], samples_per_radius=4, cfg=SimConfig(horizon=5.0),
        )
        assert not report.passed
        assert report.diverged

    def test_radii_must_increase(self, ball):
        with pytest.raises(SampleError):
            check_ugs_envelope(ball, closed_set(a1_set_document(), 2), [1.0, 0.1], unit_bounds=[(0.0, 1.0), (-1.0, 1.0)])

class TestEnvelopeImpliesInvariance:
    @pytest.mark.parametrize("name, set_document, unit_bounds, extended", [
        ("bouncing_ball", a1_set_document(), [(0.0, 1.0), (-1.0, 1.0)], False),
        ("two_balls", origin_set_document(4), [(0.0, 1.0), (-1.0, 1.0)] * 2, True),
        ("example3", a1_set_document(), [(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)], False),
    ])
    def test_stable_sets_are_invariant(self, name, set_document, unit_bounds, extended):
        sys = builtin_scenario(name)
        dim = len(unit_bounds)
        target = closed_set(set_document, dim)
        cfg = SimConfig(horizon=5.0)
        envelope = check_ugs_envelope(
            sys, target, [0.01, 0.1, 1.0], unit_bounds=unit_bounds, samples_per_radius=4, cfg=cfg, extended=extended,
        )
        assert envelope.passed, envelope.notes
        invariance = check_sfpi(sys, target, box_samples(unit_bounds, 32), cfg)
        assert invariance.n_samples >= 1
        assert invariance.passed
        assert invariance.max_distance <= 1e-6


class TestSequentialNarrowing:
    def test_example3_chain(self, example3, ball_cert_doc):
        chain = [certificate(ball_cert_doc, 3), certificate(quadratic_certificate_document(3, V="x3^2"), 3)]
        report = sequential_narrowing(example3, chain, bounds=EXAMPLE3_BOUNDS, n_points=2000, n_runs=4)
        assert report.verdict == "UGpASoZ-consistent"
        assert report.passed
        first, second = report.stages
        assert all(run["kind"] == "zeno" for run in first["runs"])
        assert all(run["omega_distance"] <= 1e-3 for run in first["runs"])
        assert second["system"] == "example3&A1"
        assert second["lyapunov"]["n_points"]["jump"] == 0

    def test_single_stage(self, ball, ball_cert_doc):
        report = sequential_narrowing(ball, [certificate(ball_cert_doc, 2)], bounds=BALL_BOUNDS, n_points=2000)
        assert report.passed
        assert len(report.stages) == 1

    def test_chain_must_be_nested(self, ball):
        document = {
            "name": "axis", "V": "x2^2", "alpha1": "s^2", "alpha2": "s^2", "rho": "s^2",
            "set_membership": "x2 == 0", "set_distance": "abs(x2)",
        }
        with pytest.raises(ChainNotNested):
            sequential_narrowing(ball, [certificate(document, 2)], bounds=[(-1.0, 1.0), (-1.0, 1.0)], n_points=64)

    def test_failing_stage_stops_the_chain(self, growth):
        chain = [certificate(quadratic_certificate_document(1), 1)]
        report = sequential_narrowing(growth, chain, bounds=[(-1.0, 1.0)], n_points=64)
        assert report.verdict == "fail"
        assert report.witness["reason"] == "lyapunov"
