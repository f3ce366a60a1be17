import json
from importlib import resources
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from nudgecast.errors import BackendError
from nudgecast.mockbackend import MockBackend
from nudgecast.promptgen import FeatureMask, build_training_dataset, get_template
from nudgecast.service import ServiceConfig, create_app
from nudgecast.sweeps import save_report

from conftest import make_corpus, make_study
from oracles import brute_force_nearest

FIXTURE = json.loads(
    (Path(__file__).resolve().parent.parent / "fixtures" / "scenario-validation.json")
    .read_text("utf-8")
)


@pytest.fixture
def app_env(tmp_path):
    corpus = make_corpus(12)
    backend = MockBackend()
    train = list(corpus)
    records = build_training_dataset(
        train, get_template("P4"), FeatureMask.all_features()
    )
    ref = backend.build_mock_model(records, mode="nearest",
                                   studies=[s for s, _ in train])
    config = ServiceConfig(
        state_dir=tmp_path / "state",
        default_model=ref.model_id,
        baseline_entries=train,
    )
    app = create_app(backend, config)
    return TestClient(app), backend, corpus, config


def scenario_body(**patch):
    body = dict(FIXTURE["base"])
    body.update(patch)
    return body


class TestPredict:
    def test_majority_matches_brute_force_nearest(self, app_env):
        client, backend, corpus, _ = app_env
        probe = make_study(77)
        body = scenario_body(
            intervention_text=probe.intervention_text,
            intervention_category=probe.intervention_category,
            location=probe.location, year=probe.year,
            population=probe.population, sample_size=probe.sample_size,
            treatment_n=probe.treatment_n, control_n=probe.control_n,
            n_runs=4, temperature=0,
        )
        response = client.post("/api/predict", json=body)
        assert response.status_code == 200
        payload = response.json()
        candidates = [
            {"study_id": s.study_id, "category": s.intervention_category,
             "location": s.location, "year": s.year, "sample_size": s.sample_size}
            for s, _ in corpus
        ]
        query = {"category": probe.intervention_category, "location": probe.location,
                 "year": probe.year, "sample_size": probe.sample_size}
        winner = brute_force_nearest(query, candidates)
        expected_direction = next(
            o.direction.value for s, o in corpus if s.study_id == winner
        )
        assert payload["aggregate"]["majority_direction"] == expected_direction
        assert payload["aggregate"]["vote_share"] == 1.0

    def test_run_count_respected(self, app_env):
        client, *_ = app_env
        response = client.post("/api/predict", json=scenario_body(n_runs=10))
        assert response.status_code == 200
        assert len(response.json()["per_run"]) == 10

    def test_zero_sample_size_names_field(self, app_env):
        client, *_ = app_env
        response = client.post("/api/predict", json=scenario_body(sample_size=0))
        assert response.status_code == 400
        errors = response.json()["errors"]
        assert any(
            e["field"] == "sample_size" and e["message"] == "sample_size must be positive"
            for e in errors
        )

    def test_shared_validation_fixture(self, app_env):
        client, *_ = app_env
        for case in FIXTURE["cases"]:
            response = client.post("/api/predict", json=scenario_body(**case["patch"]))
            if case["valid"]:
                assert response.status_code == 200, case["name"]
            else:
                assert response.status_code == 400, case["name"]
                fields = {e["field"] for e in response.json()["errors"]}
                assert fields == set(case["invalid_fields"]), case["name"]

    def test_aggregate_recomputable_from_per_run(self, app_env):
        client, *_ = app_env
        response = client.post("/api/predict", json=scenario_body(n_runs=6))
        payload = response.json()
        per_run = payload["per_run"]
        directions = [r["direction"] for r in per_run if r["direction"]]
        n_neg = sum(1 for d in directions if d == "negative")
        n_pos = len(directions) - n_neg
        expected_majority = "negative" if n_neg >= n_pos else "positive"
        agg = payload["aggregate"]
        assert agg["majority_direction"] == expected_majority
        assert agg["vote_share"] == max(n_neg, n_pos) / len(directions)
        rs = [r["r_pred"] for r in per_run if r["r_pred"] is not None]
        assert agg["r"]["mean"] == pytest.approx(sum(rs) / len(rs))
        assert agg["r"]["min"] == min(rs) and agg["r"]["max"] == max(rs)

    def test_cache_returns_byte_identical_responses(self, app_env):
        client, backend, *_ = app_env
        calls = []
        original = backend.complete

        def counted(*args, **kwargs):
            calls.append(1)
            return original(*args, **kwargs)

        backend.complete = counted
        body = scenario_body(n_runs=3)
        first = client.post("/api/predict", json=body)
        n_after_first = len(calls)
        second = client.post("/api/predict", json=body)
        assert first.content == second.content
        assert len(calls) == n_after_first  # served from cache

    def test_unknown_model_404(self, app_env):
        client, *_ = app_env
        response = client.post(
            "/api/predict", json=scenario_body(model="mock:nearest:doesnotexist")
        )
        assert response.status_code == 404

    def test_backend_exhaustion_502(self, tmp_path):
        class FailingBackend:
            provider = "mock"

            def complete(self, *a, **k):
                raise BackendError("provider down", status=503)

            def list_models(self):
                return []

        app = create_app(FailingBackend(), ServiceConfig(
            state_dir=tmp_path, default_model="m"
        ))
        client = TestClient(app)
        response = client.post("/api/predict", json=scenario_body())
        assert response.status_code == 502


class TestReadEndpoints:
    def test_models_listed_with_default_flag(self, app_env):
        client, _, _, config = app_env
        models = client.get("/api/models").json()
        assert models
        assert any(m["default"] and m["model_id"] == config.default_model
                   for m in models)

    def test_reports_listing_and_fetch(self, app_env):
        client, _, corpus, config = app_env
        from test_evalkit import records_for  # reuse the record builder
        from nudgecast.evalkit import aggregate_runs, evaluate_run
        report = aggregate_runs(
            [evaluate_run(records_for(corpus), list(corpus))], model_id="m"
        )
        save_report(config.state_dir, "eval-test123", report.to_json_dict())
        listed = client.get("/api/reports").json()
        assert any(r["id"] == "eval-test123" for r in listed)
        fetched = client.get("/api/reports/eval-test123")
        assert fetched.status_code == 200
        schema = json.loads(
            resources.files("nudgecast")
            .joinpath("assets/evalreport.schema.json").read_text("utf-8")
        )
        jsonschema.validate(fetched.json(), schema)

    def test_unknown_report_404(self, app_env):
        client, *_ = app_env
        assert client.get("/api/reports/nope").status_code == 404

    def test_baseline_endpoint(self, app_env):
        client, *_ = app_env
        payload = client.get("/api/baseline").json()
        assert payload["modal_direction"] in ("positive", "negative")
        assert payload["mean_abs_r"] > 0

    def test_static_ui_mounted_when_dist_exists(self, tmp_path):
        dist = tmp_path / "dist"
        dist.mkdir()
        (dist / "index.html").write_text("<html><body>explorer</body></html>")
        backend = MockBackend()
        app = create_app(backend, ServiceConfig(
            state_dir=tmp_path / "state", default_model="", frontend_dist=dist
        ))
        client = TestClient(app)
        response = client.get("/")
        assert response.status_code == 200
        assert "explorer" in response.text
