#!/usr/bin/env python3
"""
Report Store - SQLite ledger of verification runs and constructed maps

License: Apache-2.0
"""

import json
import sqlite3
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from loguru import logger

from verify_core import VerificationReport


class ReportStore:
    """Append-only history of suite runs, one row per property report"""

    def __init__(self, db_path: str = "hartogs_reports.db"):
        self.db_path = str(db_path)
        self.db_lock = threading.RLock()
        self.session_id = f"session_{datetime.now().strftime('%Y%m%d_%H%M%S_%f')}"
        if self.db_path != ":memory:":
            Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._initialize_database()

    def _initialize_database(self):
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS verification_runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    session_id TEXT NOT NULL,
                    map_case TEXT NOT NULL,
                    src TEXT NOT NULL,
                    dst TEXT NOT NULL,
                    property TEXT NOT NULL,
                    samples INTEGER NOT NULL,
                    worst_residual REAL NOT NULL,
                    tolerance REAL NOT NULL,
                    passed INTEGER NOT NULL,
                    seed INTEGER,
                    details TEXT DEFAULT '{}',
                    created_at TEXT DEFAULT CURRENT_TIMESTAMP
                )
            ''')

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS constructed_maps (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    session_id TEXT NOT NULL,
                    map_case TEXT NOT NULL,
                    src TEXT NOT NULL,
                    dst TEXT NOT NULL,
                    descriptor TEXT NOT NULL,
                    created_at TEXT DEFAULT CURRENT_TIMESTAMP
                )
            ''')

            conn.commit()
        logger.debug(f"report store ready at {self.db_path}")

    def record_run(self, map_payload: Dict[str, Any], reports: Sequence[VerificationReport]) -> int:
        """Store one row per report; returns the number of rows written"""
        rows = [
            (
                self.session_id,
                map_payload.get("case", ""),
                json.dumps(map_payload.get("src", {})),
                json.dumps(map_payload.get("dst", {})),
                report.property,
                report.samples,
                float(report.worst_residual),
                float(report.tolerance),
                int(report.passed),
                report.seed,
                json.dumps(report.details, default=str),
            )
            for report in reports
        ]
        with self.db_lock, sqlite3.connect(self.db_path) as conn:
            conn.executemany('''
                INSERT INTO verification_runs
                (session_id, map_case, src, dst, property, samples, worst_residual, tolerance, passed, seed, details)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            ''', rows)
            conn.commit()
        logger.info(f"recorded {len(rows)} reports for session {self.session_id}")
        return len(rows)

    def record_map(self, map_payload: Dict[str, Any]) -> int:
        with self.db_lock, sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                INSERT INTO constructed_maps (session_id, map_case, src, dst, descriptor)
                VALUES (?, ?, ?, ?, ?)
            ''', (
                self.session_id,
                map_payload.get("case", ""),
                json.dumps(map_payload.get("src", {})),
                json.dumps(map_payload.get("dst", {})),
                json.dumps(map_payload),
            ))
            conn.commit()
            return int(cursor.lastrowid)

    def recent_runs(self, limit: int = 20, property_name: Optional[str] = None) -> List[Dict[str, Any]]:
        query = '''
            SELECT session_id, map_case, src, dst, property, samples, worst_residual, tolerance, passed, seed,
                   details, created_at
            FROM verification_runs
        '''
        params: List[Any] = []
        if property_name is not None:
            query += " WHERE property = ?"
            params.append(property_name)
        query += " ORDER BY id DESC LIMIT ?"
        params.append(limit)

        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute(query, params)
            rows = cursor.fetchall()

        return [
            {
                "session_id": row[0],
                "case": row[1],
                "src": json.loads(row[2]),
                "dst": json.loads(row[3]),
                "property": row[4],
                "samples": row[5],
                "worst_residual": row[6],
                "tolerance": row[7],
                "pass": bool(row[8]),
                "seed": row[9],
                "details": json.loads(row[10]),
                "created_at": row[11],
            }
            for row in rows
        ]

    def failure_count(self, session_id: Optional[str] = None) -> int:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT COUNT(*) FROM verification_runs WHERE passed = 0 AND session_id = ?",
                (session_id or self.session_id,),
            )
            return int(cursor.fetchone()[0])
