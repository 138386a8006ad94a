"""Wire-protocol tests: the HTTP clients talking to the FastAPI service."""

import httpx
import pytest
from fastapi.testclient import TestClient

from corpusforge.backends import (
    BackendError,
    GenerationParams,
    HashGenerator,
    HashScorer,
    HttpGenerator,
    HttpQeScorer,
    HttpTranslator,
    RetryPolicy,
    StampTranslator,
)
from corpusforge.manifest import LanguageTag
from corpusforge.server import create_mock_app

EN, DE = LanguageTag.EN, LanguageTag.DE
FAST_RETRY = RetryPolicy(base_delay_s=0.0, max_attempts=2)


@pytest.fixture(scope="module")
def app_transport():
    test_client = TestClient(create_mock_app(seed=5, systems=("mt-a", "mt-b")))

    def handler(request: httpx.Request) -> httpx.Response:
        resp = test_client.post(
            request.url.path,
            content=request.content,
            headers={"content-type": "application/json"},
        )
        return httpx.Response(resp.status_code, content=resp.content)

    return httpx.MockTransport(handler)


def test_translate_through_service(app_transport):
    client = HttpTranslator("mt-a", "http://svc", transport=app_transport, retry=FAST_RETRY)
    assert client.translate("hello", EN, DE) == StampTranslator("mt-a").translate("hello", EN, DE)


def test_unknown_system_is_backend_error(app_transport):
    client = HttpTranslator("nope", "http://svc", transport=app_transport, retry=FAST_RETRY)
    with pytest.raises(BackendError, match="404"):
        client.translate("hello", EN, DE)


def test_same_language_rejected_by_service(app_transport):
    # The client's own precondition would catch this first; go straight to HTTP.
    test_resp = TestClient(create_mock_app()).post(
        "/translate",
        json={"source_text": "x", "source_lang": "en", "target_lang": "en"},
    )
    assert test_resp.status_code == 400


def test_validation_error_for_empty_text():
    resp = TestClient(create_mock_app()).post(
        "/score",
        json={"source_text": "", "hypothesis": "h", "source_lang": "en", "target_lang": "de"},
    )
    assert resp.status_code == 422


def test_score_through_service_matches_mock(app_transport):
    client = HttpQeScorer("http://svc", transport=app_transport, retry=FAST_RETRY)
    expected = HashScorer(seed=5).score("src", "hyp", EN, DE)
    assert client.score("src", "hyp", EN, DE) == pytest.approx(expected)


def test_generate_through_service_matches_mock(app_transport):
    client = HttpGenerator("http://svc", transport=app_transport, retry=FAST_RETRY)
    expected = HashGenerator(seed=5).generate("a prompt", GenerationParams())
    assert client.generate("a prompt", GenerationParams()) == expected
