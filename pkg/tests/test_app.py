import pytest

from app import DEBUG_ENV, app, server_options


@pytest.fixture
def client():
    app.config.update(TESTING=True)
    with app.test_client() as client:
        yield client


def test_index(client):
    response = client.get("/")
    assert response.status_code == 200
    body = response.get_json()
    assert "/api/bound" in body["endpoints"]
    assert "python" in body["versions"]


def test_families(client):
    body = client.get("/api/families").get_json()
    assert set(body["families"]) == {"subexp", "subweibull", "polynomial"}
    assert "constant" in body["c_methods"]


def test_bound(client):
    response = client.post("/api/bound", json={
        "tail": "subweibull", "alpha": 2, "c_alpha": 1, "m": 100, "t": 5, "beta": 0.5,
        "c_method": "constant", "c_value": 20,
    })
    assert response.status_code == 200
    body = response.get_json()
    assert body["success"]
    assert body["bound"]["regime"] == "HeavyTail"
    assert body["c_method"] == "constant"


def test_bound_default_provider(client):
    body = client.post("/api/bound", json={"tail": "subexp", "k": 1, "m": 100, "t": 20}).get_json()
    assert body["success"]
    assert body["c_method"] == "closed"
    assert body["bound"]["params"]["beta"] == 0.9


@pytest.mark.parametrize("payload, message", [
    ({"tail": "subexp", "k": 1, "t": 1}, "'m' is required"),
    ({"tail": "cauchy", "m": 10, "t": 1}, "'tail' must be one of"),
    ({"tail": "subexp", "k": "one", "m": 10, "t": 1}, "'k' must be a number"),
    ({"tail": "subexp", "k": 1, "m": 2.5, "t": 1}, "'m' must be an integer"),
    ({"tail": "polynomial", "gamma": 1.5, "m": 10, "t": 1}, "finite variance"),
    ({"tail": "subexp", "k": 1, "m": 10, "t": 1, "beta": 1.5}, "'beta' must lie in (0, 1]"),
    ({"tail": "subexp", "k": 1, "m": 10, "t": 1, "c_method": "constant"}, "'c_value' is required"),
])
def test_bad_requests(client, payload, message):
    response = client.post("/api/bound", json=payload)
    assert response.status_code == 400
    body = response.get_json()
    assert not body["success"]
    assert message in body["error"]


def test_body_must_be_json(client):
    response = client.post("/api/bound", data="m=10", content_type="text/plain")
    assert response.status_code == 400


def test_numerical_failure(client):
    response = client.post("/api/bound", json={
        "tail": "subexp", "k": 1, "m": 10, "t": 1, "beta": 1, "c_method": "ratio",
    })
    assert response.status_code == 422
    assert response.get_json()["error"].startswith("DomainError")


def test_cbeta(client):
    body = client.post("/api/cbeta", json={"tail": "subexp", "k": 1, "L": 50, "beta": 0.5}).get_json()
    assert body["success"]
    assert body["estimates"]["ClosedFormSubExp"]["value"] == pytest.approx(6.1504, abs=1e-3)


def test_cbeta_requires_beta(client):
    response = client.post("/api/cbeta", json={"tail": "subexp", "k": 1, "L": 50})
    assert response.status_code == 400


def test_tmax(client):
    body = client.post("/api/tmax", json={
        "tail": "subweibull", "alpha": 2, "c_alpha": 1, "m": 100, "beta": 0.5,
        "c_method": "constant", "c_value": 20,
    }).get_json()
    assert body["t_max"] == pytest.approx(1.0)


def test_no_secret_key():
    assert app.secret_key is None


class TestServerOptions:
    def test_defaults_are_local_without_debugger(self):
        assert server_options({}) == {"debug": False, "host": "127.0.0.1", "port": 5001}

    def test_debug_flag(self):
        assert server_options({DEBUG_ENV: "1"})["debug"]
        assert not server_options({DEBUG_ENV: "true"})["debug"]

    def test_reads_process_environment(self, monkeypatch):
        monkeypatch.setenv(DEBUG_ENV, "1")
        assert server_options()["debug"]
        monkeypatch.delenv(DEBUG_ENV)
        assert not server_options()["debug"]
