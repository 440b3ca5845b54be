"""The shared backend contract suite, run against the mock and, when it
can be built, against the HTTP shim service."""

import pytest

import backend_conformance as conformance
from shim_process import ShimUnavailable, spawn_shim

from nfqa.backends import BackendEndpoint, HttpBackend
from nfqa.mockbackend import MockBackend, MockConfig


@pytest.fixture(scope="module")
def shim_backend():
    try:
        with spawn_shim() as base_url:
            yield HttpBackend(BackendEndpoint(url=base_url))
    except ShimUnavailable as exc:
        pytest.skip(f"shim unavailable: {exc}")


@pytest.mark.parametrize("check", conformance.ALL_CHECKS,
                         ids=lambda c: c.__name__)
def test_mock_backend_conformance(check):
    check(MockBackend(MockConfig(seed=0)), generate_model="echo")


@pytest.mark.parametrize("check", conformance.ALL_CHECKS,
                         ids=lambda c: c.__name__)
def test_shim_backend_conformance(shim_backend, check):
    check(shim_backend, generate_model="echo")


def test_shim_health_lists_registry(shim_backend):
    health = shim_backend.health()
    ids = {m["model_id"] for m in health["models"]}
    assert {"use", "labse", "laser", "mbert", "aps", "echo"} <= ids
    for model in health["models"]:
        if model["kind"] in ("sentence_embed", "token_embed"):
            assert model["dim"] > 0


def test_shim_prompt_too_long_maps_to_typed_error(shim_backend):
    from nfqa.backends import PromptTooLong
    from nfqa.genclient import build_qa_prompt

    huge_context = " ".join(f"w{i}" for i in range(9000))
    prompt = build_qa_prompt("q", huge_context)
    with pytest.raises(PromptTooLong) as exc_info:
        shim_backend.generate("echo", prompt, 0.001, 8, 0)
    assert exc_info.value.model_id == "echo"
    assert exc_info.value.limit >= 1


def test_pipeline_runs_against_shim(tmp_path, shim_backend):
    # End-to-end smoke through the real wire protocol: shorten with the
    # cross-encoder, echo-generate, evaluate.
    from conftest import build_planted_fixture
    from nfqa.pipeline import PipelineConfig, run_pipeline

    dataset, _ = build_planted_fixture(tmp_path, n_records=3)
    config = PipelineConfig(
        dataset=str(dataset),
        backend="shim",
        backend_url=shim_backend.endpoint.url,
        strategy="A1",
        scorer="aps",
        model="echo",
        out=str(tmp_path / "runs"),
        run_id="shim-smoke",
    )
    result = run_pipeline(config)
    assert result.exit_code == 0
    assert len(result.rows) == 3
