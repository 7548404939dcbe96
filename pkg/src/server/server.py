import logging
import socket
import socketserver

from agent.trainer import Trainer
from config.settings import READ_TIMEOUT_S
from protocol.protocol import (
    ConnectionClosed,
    Connection,
    DecodeError,
    ProtocolError,
    serve_session,
)

"""
Agent-side decision service.

A device connects over TCP and drives a session:
Hello, then per frame Obs/Act twice, with the frame outcome piggybacked
on the next Obs, and finally Bye.

Responsibilities:
- Answer each observation with the governor's (or learner's) action
- Train online when started with a learner, checkpointing on any exit
- Export per-frame metrics when a FrameMetrics sink is attached
"""

logger = logging.getLogger("SERVER")


# -------------------------------
# Session Handlers
# -------------------------------

class InferenceSession:
    """Answers decisions from a fixed policy."""

    def __init__(self, governor, metrics=None):
        self.governor = governor
        self.metrics = metrics
        self.last_action = None
        self.frames = 0

    def hello(self, msg):
        logger.info("Device %s connected (budget %s ms)", msg.device_profile, msg.budget_ms)

    def decide(self, obs):
        self.last_action = self.governor.act(obs)
        return self.last_action

    def frame_done(self, result):
        self.frames += 1
        if self.metrics is not None:
            self.metrics.observe_frame(result, self.last_action)

    def finish(self, completed):
        logger.info("Session %s after %d frames", "closed" if completed else "aborted",
                    self.frames)


class TrainingSession(InferenceSession):
    """
    Trains the agent on the frames the device reports.

    The checkpoint is written when the session ends, cleanly or not,
    so an interrupted run loses at most the current frame.
    """

    def __init__(self, agent, rewarder, checkpoint, metrics=None, max_frames=None, log=None):
        super().__init__(governor=None, metrics=metrics)
        self.agent = agent
        self.checkpoint = checkpoint
        self.trainer = Trainer(agent, rewarder, max_frames=max_frames, log=log)

    def hello(self, msg):
        super().hello(msg)
        budget = self.agent.constraint.budget_ms
        if msg.budget_ms is not None and msg.budget_ms != budget:
            logger.warning("Device budget %.1f ms differs from agent budget %.1f ms",
                           msg.budget_ms, budget)

    def decide(self, obs):
        self.last_action = self.trainer.decide(obs)
        return self.last_action

    def frame_done(self, result):
        self.trainer.frame_done(result)
        super().frame_done(result)

    def finish(self, completed):
        super().finish(completed)
        self.agent.save(self.checkpoint)
        logger.info("Training at %d iterations after %d frames",
                    self.agent.iterations, self.trainer.frames)


# -------------------------------
# TCP Server
# -------------------------------

class AgentRequestHandler(socketserver.BaseRequestHandler):
    """One device connection, served to completion."""

    def handle(self):
        conn = Connection(self.request, timeout=self.server.read_timeout)
        session = self.server.session_factory()
        completed = False
        try:
            frames = serve_session(conn, session)
            completed = True
            logger.info("Bye after %d frames (%d critical messages)",
                        frames, conn.session.critical_messages)
        except (ConnectionClosed, socket.timeout, ConnectionError) as e:
            logger.warning("Connection lost: %s", e)
        except (DecodeError, ProtocolError) as e:
            logger.error("Protocol violation from %s: %s", self.client_address, e)
        finally:
            self.server.sessions += 1
            try:
                session.finish(completed)
            finally:
                conn.close()


class AgentServer(socketserver.TCPServer):
    allow_reuse_address = True

    def __init__(self, address, session_factory, read_timeout=READ_TIMEOUT_S):
        self.session_factory = session_factory
        self.read_timeout = read_timeout
        self.sessions = 0
        super().__init__(address, AgentRequestHandler)

    @property
    def port(self):
        return self.server_address[1]


def serve_agent(server, max_sessions=None):
    """Serve sessions one at a time; forever unless `max_sessions` is given."""
    logger.info("Agent listening on port %d", server.port)
    try:
        if max_sessions is None:
            server.serve_forever()
        else:
            while server.sessions < max_sessions:
                server.handle_request()
    finally:
        server.server_close()
