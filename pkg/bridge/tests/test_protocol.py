"""Protocol suite against a live subprocess server (random-init micro arch)."""
import numpy as np
import pytest

from frame_client import FrameClient, server_cmd


@pytest.fixture(scope="module")
def client():
    with FrameClient(server_cmd("--random-init", "--arch", "micro",
                                "--init-seed", "7")) as c:
        yield c


def series(n=3, length=40, seed=0):
    rng = np.random.default_rng(seed)
    return {f"S{i:03d}": [float(v) for v in rng.normal(0, 0.01, length)]
            for i in range(n)}


class TestHandshake:
    def test_hello_ack_fields(self, client):
        # the module fixture already sent hello; send another (ids increase)
        ack = client.request({"kind": "hello"})
        assert ack["kind"] == "hello_ack"
        assert ack["protocol_version"] == "1"
        assert ack["model_id"] == "random-init/micro"
        assert ack["n_parameters"] > 0


class TestForecast:
    def test_matching_ids_and_finite_values(self, client):
        req = series()
        reply = client.forecast(req, num_samples=4, seed=3)
        assert reply["kind"] == "forecast_response"
        assert set(reply["forecasts"]) == set(req)
        assert all(np.isfinite(v) for v in reply["forecasts"].values())

    def test_seed_determinism_across_requests(self, client):
        req = series(seed=5)
        a = client.forecast(req, num_samples=6, seed=11)
        b = client.forecast(req, num_samples=6, seed=11)
        assert a["forecasts"] == b["forecasts"]

    def test_different_seeds_differ(self, client):
        req = series(seed=5)
        a = client.forecast(req, num_samples=6, seed=1)
        b = client.forecast(req, num_samples=6, seed=2)
        assert a["forecasts"] != b["forecasts"]

    def test_context_too_long_is_an_error_frame(self, client):
        reply = client.forecast({"A": [0.0] * 101})
        assert reply["kind"] == "error"
        assert "context too long" in reply["message"]

    def test_non_finite_context_rejected(self, client):
        reply = client.forecast({"A": [0.1, float("nan")]})
        assert reply["kind"] == "error"

    def test_invalid_num_samples_rejected(self, client):
        reply = client.forecast(series(n=1), num_samples=0)
        assert reply["kind"] == "error"


class TestSessionRobustness:
    def test_unknown_kind_keeps_session_alive(self, client):
        reply = client.request({"kind": "frobnicate"})
        assert reply["kind"] == "error"
        assert "frobnicate" in reply["message"]
        follow_up = client.forecast(series(n=1), num_samples=2, seed=0)
        assert follow_up["kind"] == "forecast_response"

    def test_non_increasing_request_id_is_an_error(self, client):
        reply = client.request({"kind": "hello", "request_id": 0})
        assert reply["kind"] == "error"
        assert "not increasing" in reply["message"]

    def test_malformed_json_gets_error_frame(self, client):
        client.proc.stdin.write("this is not json\n")
        client.proc.stdin.flush()
        reply = client.read_frame()
        assert reply["kind"] == "error"
        assert reply["request_id"] is None


class TestFinetuneOverProtocol:
    def test_ack_reports_steps(self, client):
        rng = np.random.default_rng(1)
        panel = {f"S{i:02d}": [float(v) for v in rng.normal(0, 0.01, 100)]
                 for i in range(10)}
        reply = client.finetune(panel, tau=1)
        assert reply["kind"] == "finetune_ack"
        assert reply["steps_done"] == 10  # 10 subgroups x 1 step
        assert reply["loss_last"] is not None

    def test_short_panel_is_an_error(self, client):
        reply = client.finetune({"A": [0.1] * 30}, tau=1)
        assert reply["kind"] == "error"


class TestLifecycle:
    def test_shutdown_exits_zero(self):
        client = FrameClient(server_cmd("--random-init", "--arch", "micro"))
        client.start()
        assert client.shutdown() == 0

    def test_model_load_failure_emits_error_and_exits_3(self, tmp_path):
        import json
        import subprocess

        proc = subprocess.run(
            server_cmd("--model", str(tmp_path / "no-such-checkpoint")),
            input="", capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 3
        frame = json.loads(proc.stdout.strip().splitlines()[0])
        assert frame["kind"] == "error"
        assert "no-such-checkpoint" in frame["message"]

    def test_fault_injection_rolls_back(self):
        with FrameClient(server_cmd("--random-init", "--arch", "micro",
                                    "--init-seed", "7",
                                    "--fault-inject", "nan-loss")) as client:
            req = series(seed=8)
            pre = client.forecast(req, num_samples=4, seed=21)
            rng = np.random.default_rng(2)
            panel = {f"S{i:02d}": [float(v) for v in rng.normal(0, 0.01, 100)]
                     for i in range(10)}
            err = client.finetune(panel, tau=2)
            assert err["kind"] == "error"
            assert "rolled back" in err["message"]
            post = client.forecast(req, num_samples=4, seed=21)
            assert pre["forecasts"] == post["forecasts"]
