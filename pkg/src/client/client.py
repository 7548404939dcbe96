import logging
import socket

from config.settings import AGENT_HOST, AGENT_PORT, READ_TIMEOUT_S
from protocol.protocol import Connection, DecodeError, DeviceChannel, ProtocolError

"""
Device-side client.

Runs a (simulated) device and asks a remote agent for frequency levels
at both decision points of every frame.

The agent is treated as the single source of decisions: the device only
reports observations and frame outcomes.
"""

logger = logging.getLogger("CLIENT")

CLIENT_ID = socket.gethostname()


def connect(host=AGENT_HOST, port=AGENT_PORT, timeout=READ_TIMEOUT_S):
    """Open a protocol connection to the agent."""
    sock = socket.create_connection((host, port), timeout=timeout)
    return Connection(sock, timeout=timeout)


def run_device_client(device, profile_name, frames, host=AGENT_HOST, port=AGENT_PORT,
                      timeout=READ_TIMEOUT_S, metrics=None, conn=None):
    """
    Drive `frames` frames through a remote agent; returns the frame traces.

    A connection may be passed in (tests use a socket pair).
    """
    conn = conn or connect(host, port, timeout)
    channel = DeviceChannel(conn)
    traces = []
    try:
        channel.hello(profile_name, device.budget_ms)
        logger.info("Client %s: %s, %d frames, budget %.1f ms",
                    CLIENT_ID, profile_name, frames, device.budget_ms)
        for _ in range(frames):
            trace = device.step(channel.decide)
            channel.frame_done(trace.result)
            trace.samples = []
            traces.append(trace)
            if metrics is not None:
                metrics.observe_frame(trace.result, trace.action_b, trace.throttle_events)
        channel.close()
        logger.info("Session done: %d frames, %d messages sent",
                    len(traces), conn.sent)
    except (OSError, DecodeError, ProtocolError) as e:
        logger.error("Session with agent failed after %d frames: %s", len(traces), e)
        raise
    finally:
        conn.close()
    return traces
