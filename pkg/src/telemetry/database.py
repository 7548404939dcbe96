import logging

import psycopg2
from psycopg2.extras import execute_values

from config.settings import POSTGRES

"""
Optional PostgreSQL persistence of per-frame evaluation rows.

One append-only table, rows tagged with the run they belong to.
Nothing here is required by the simulator or the agent; callers treat
failures as warnings.
"""

logger = logging.getLogger("DB")

FRAME_COLUMNS = (
    "frame", "total_ms", "stage1_ms", "stage2_ms", "proposals",
    "cpu_temp", "gpu_temp",
    "cpu_level_a", "gpu_level_a", "cpu_level_b", "gpu_level_b",
)


def get_db():
    """
    Create and return a database connection.

    The connection details are loaded from the configuration.
    """
    try:
        return psycopg2.connect(
            host=POSTGRES["host"],
            port=POSTGRES["port"],
            user=POSTGRES["user"],
            password=POSTGRES["password"],
            dbname=POSTGRES["dbname"],
        )
    except psycopg2.OperationalError as e:
        logger.error("Connection failed: %s", e)
        raise


def init_database():
    """Create the frame table if it does not exist."""
    conn = get_db()
    try:
        cur = conn.cursor()
        cur.execute("""
            CREATE TABLE IF NOT EXISTS frame_events (
                event_id SERIAL PRIMARY KEY,
                run_id TEXT NOT NULL,
                governor TEXT NOT NULL,
                frame INTEGER NOT NULL,
                total_ms DOUBLE PRECISION,
                stage1_ms DOUBLE PRECISION,
                stage2_ms DOUBLE PRECISION,
                proposals INTEGER,
                cpu_temp DOUBLE PRECISION,
                gpu_temp DOUBLE PRECISION,
                cpu_level_a INTEGER,
                gpu_level_a INTEGER,
                cpu_level_b INTEGER,
                gpu_level_b INTEGER,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)
        conn.commit()
        logger.info("Frame table initialized")
    finally:
        conn.close()


def save_frames(run_id, governor, rows):
    """Insert per-frame rows in one batch; returns the number stored."""
    if not rows:
        return 0
    conn = get_db()
    try:
        cur = conn.cursor()
        values = [
            (run_id, governor) + tuple(row[c] for c in FRAME_COLUMNS)
            for row in rows
        ]
        execute_values(
            cur,
            f"INSERT INTO frame_events (run_id, governor, {', '.join(FRAME_COLUMNS)}) VALUES %s",
            values,
        )
        conn.commit()
        logger.info("Stored %d frames for run %s", len(values), run_id)
        return len(values)
    finally:
        conn.close()


def persist_run(run_id, governor, rows):
    """Best-effort: initialize and store, logging instead of raising."""
    try:
        init_database()
        return save_frames(run_id, governor, rows)
    except Exception as e:
        logger.warning("Could not persist run %s: %s", run_id, e)
        return 0
