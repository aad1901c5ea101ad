"""
Line-delimited scoring protocol.

Each request line is a JSON object ``{id, ground_truth, response_text,
num_images}``; each reply line is ``{id, r_miou, r_format, total,
diagnostics}``. A request that cannot be interpreted produces
``{id, error, line}`` and the loop carries on.
"""

from __future__ import annotations

import json
import logging
import os
import socketserver
from typing import IO, Iterable, Iterator

from ..io import SCORE_REPLY_SCHEMA, SCORE_REQUEST_SCHEMA, dumps
from ..reward import total_reward
from ..synth.samples import targets_from_dicts

logger = logging.getLogger(__name__)


def score_request(request: dict) -> dict:
    """Score one decoded request; raises ``ValueError``/``KeyError``/``TypeError`` on bad requests."""
    if not isinstance(request, dict):
        raise TypeError("request must be a JSON object")
    schema = request.get("schema", SCORE_REQUEST_SCHEMA)
    if schema != SCORE_REQUEST_SCHEMA:
        raise ValueError(f"unsupported schema {schema!r}")
    gts = targets_from_dicts(request["ground_truth"])
    response = request["response_text"]
    if not isinstance(response, str):
        raise TypeError("response_text must be a string")
    breakdown = total_reward(response, gts, request.get("num_images"))
    reply = {"schema": SCORE_REPLY_SCHEMA, "id": request.get("id")}
    reply.update(breakdown.to_dict())
    return reply


def score_line(line: str, lineno: int) -> dict:
    request_id = None
    try:
        request = json.loads(line)
        if isinstance(request, dict):
            request_id = request.get("id")
        return score_request(request)
    except (ValueError, KeyError, TypeError) as exc:
        return {"schema": SCORE_REPLY_SCHEMA, "id": request_id, "error": f"{type(exc).__name__}: {exc}", "line": lineno}


def score_lines(lines: Iterable[str]) -> Iterator[dict]:
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            yield score_line(line, lineno)


def serve_scoring(instream: IO[str], outstream: IO[str]) -> int:
    """Score requests until ``instream`` closes; flushes after every reply. Returns the reply count."""
    n = 0
    for reply in score_lines(instream):
        outstream.write(dumps(reply) + "\n")
        outstream.flush()
        n += 1
    return n


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for lineno, raw in enumerate(self.rfile, 1):
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            self.wfile.write((dumps(score_line(line, lineno)) + "\n").encode("utf-8"))
            self.wfile.flush()


class ScoringServer(socketserver.ThreadingMixIn, socketserver.UnixStreamServer):
    daemon_threads = True


def serve_socket(path: str) -> ScoringServer:
    """Bind a local socket speaking the same protocol; call ``serve_forever`` on the result."""
    if os.path.exists(path):
        os.unlink(path)
    return ScoringServer(path, _Handler)
