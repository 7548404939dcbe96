"""Test a device client against a live agent server on a loopback port."""

import sys
import os
import socket
import tempfile
import threading

import numpy as np

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from agent.agent import AgentConfig, SdsAgent  # noqa: E402
from client.client import connect, run_device_client  # noqa: E402
from core.model import (  # noqa: E402
    FrequencyTable,
    LatencyConstraint,
    RewardConfig,
    ThermalConfig,
)
from device.simulator import (  # noqa: E402
    DeviceModel,
    LatencyModelParams,
    ProcessorThermalParams,
    SimulatedDevice,
)
from governors.governors import FixedGovernor, OndemandGovernor  # noqa: E402
from protocol.protocol import Act, DeviceChannel, encode, frame_overhead  # noqa: E402
from qnet.slimmable import load_checkpoint  # noqa: E402
from reward.reward import FrameRewarder  # noqa: E402
from server.server import (  # noqa: E402
    AgentServer,
    InferenceSession,
    TrainingSession,
    serve_agent,
)
from workload.workload import FrameWorkload, WorkloadSource  # noqa: E402

TABLE = FrequencyTable((500.0, 1000.0, 2000.0), (250.0, 500.0, 1000.0))
THERMAL = ThermalConfig(70, 80, 5)
BUDGET = 400.0


def _device(overhead=None):
    model = DeviceModel(
        TABLE,
        ProcessorThermalParams(2.0, 12.0, 20.0, 1.0, 0.4),
        ProcessorThermalParams(3.0, 10.0, 20.0, 10.0, 0.5),
        LatencyModelParams(20.0, 200.0, 10.0, 20.0, 0.05, 0.1, 0.0),
        THERMAL,
    )
    trace = [FrameWorkload(i, p) for i, p in enumerate((80, 150, 420))]
    kwargs = {} if overhead is None else {"overhead": overhead}
    return SimulatedDevice(model, WorkloadSource(trace=trace), BUDGET, **kwargs)


def _start(factory, sessions=1):
    server = AgentServer(("127.0.0.1", 0), factory, read_timeout=5.0)
    thread = threading.Thread(target=serve_agent, args=(server, sessions), daemon=True)
    thread.start()
    return server, thread


def test_remote_matches_local_fixed_governor():
    sessions = []

    def factory():
        sessions.append(InferenceSession(FixedGovernor(TABLE)))
        return sessions[-1]

    server, thread = _start(factory)
    traces = run_device_client(_device(frame_overhead(2)), "test-device", 6,
                               host="127.0.0.1", port=server.port, timeout=5.0)
    thread.join(timeout=10.0)

    local = _device(frame_overhead(2))
    expected = [local.step(lambda obs: TABLE.max_action()) for _ in range(6)]
    assert [t.total_ms for t in traces] == [t.total_ms for t in expected]
    assert all(t.action_b == TABLE.max_action() for t in traces)
    assert sessions[0].frames == 6
    assert server.sessions == 1
    print("[OK] Remote fixed governor matches the local run")


def test_training_session_checkpoints_on_bye():
    agent = SdsAgent(TABLE, LatencyConstraint(BUDGET), THERMAL,
                     cfg=AgentConfig(warmup=4, batch_size=4), seed=1)
    rewarder = FrameRewarder(RewardConfig(), THERMAL, BUDGET)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "online.npz")
        server, thread = _start(lambda: TrainingSession(agent, rewarder, path))
        run_device_client(_device(), "test-device", 12, host="127.0.0.1", port=server.port,
                          timeout=5.0)
        thread.join(timeout=10.0)
        assert os.path.exists(path)
        net, _, meta = load_checkpoint(path)

    assert agent.iterations > 0
    assert meta["iterations"] == agent.iterations
    assert agent.buffers.sizes() == (11, 11)
    for k in net.params:
        assert np.array_equal(net.params[k], agent.online.params[k])
    print(f"[OK] Online training stopped at {agent.iterations} iterations, checkpoint written")


def test_training_session_checkpoints_on_disconnect():
    agent = SdsAgent(TABLE, LatencyConstraint(BUDGET), THERMAL, seed=2)
    rewarder = FrameRewarder(RewardConfig(), THERMAL, BUDGET)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "aborted.npz")
        server, thread = _start(lambda: TrainingSession(agent, rewarder, path))
        conn = connect("127.0.0.1", server.port, timeout=5.0)
        channel = DeviceChannel(conn)
        channel.hello("test-device")
        device = _device()
        device.step(channel.decide)
        conn.close()
        thread.join(timeout=10.0)
        assert os.path.exists(path)
    assert server.sessions == 1
    print("[OK] Dropped session still checkpoints")


def test_protocol_violation_ends_session():
    server, thread = _start(lambda: InferenceSession(OndemandGovernor(TABLE)))
    sock = socket.create_connection(("127.0.0.1", server.port), timeout=5.0)
    sock.sendall(encode(Act(0, 0)))
    sock.settimeout(5.0)
    assert sock.recv(16) == b""
    sock.close()
    thread.join(timeout=10.0)
    assert server.sessions == 1
    print("[OK] Out-of-order message closes the session")


if __name__ == "__main__":
    test_remote_matches_local_fixed_governor()
    test_training_session_checkpoints_on_bye()
    test_training_session_checkpoints_on_disconnect()
    test_protocol_violation_ends_session()
