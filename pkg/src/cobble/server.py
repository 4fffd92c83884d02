"""Line-protocol network front end.

One UTF-8 LF-terminated command per line, one response line each:

    BEGIN                          -> OK <txnId> <st>
    READ <txnId> <key>             -> OK <value>
    UPD <txnId> <key> ASSIGN <n>   -> OK
    UPD <txnId> <key> INCR <n>     -> OK
    COMMIT <txnId>                 -> OK <ct> | CONFLICT
    ABORT <txnId>                  -> OK

Anything malformed answers ERR <reason> and the connection stays open.
Transactions are scoped to the connection that began them; whatever is
still open when a client disconnects gets aborted.
"""

from __future__ import annotations

import socket
import socketserver

from .store import StoreError, TransactionError, WindowError
from .transactions import TransactionCoordinator, TransactionManager


def handle_line(manager: TransactionManager,
                session: dict[str, TransactionCoordinator], line: str) -> str:
    parts = line.split()
    if not parts:
        return "ERR empty command"
    cmd = parts[0].upper()
    try:
        if cmd == "BEGIN":
            if len(parts) != 1:
                return "ERR BEGIN takes no arguments"
            coord = manager.begin_txn()
            session[coord.txn_id] = coord
            return f"OK {coord.txn_id} {coord.st}"
        if cmd == "READ":
            if len(parts) != 3:
                return "ERR usage: READ <txnId> <key>"
            coord = session.get(parts[1])
            if coord is None:
                return f"ERR no txn {parts[1]} on this connection"
            return f"OK {coord.read(parts[2])}"
        if cmd == "UPD":
            if len(parts) != 5 or parts[3] not in ("ASSIGN", "INCR"):
                return "ERR usage: UPD <txnId> <key> ASSIGN|INCR <amount>"
            coord = session.get(parts[1])
            if coord is None:
                return f"ERR no txn {parts[1]} on this connection"
            try:
                amount = int(parts[4])
            except ValueError:
                return f"ERR amount {parts[4]!r} is not an integer"
            if parts[3] == "ASSIGN":
                coord.assign(parts[2], amount)
            else:
                coord.incr(parts[2], amount)
            return "OK"
        if cmd == "COMMIT":
            if len(parts) != 2:
                return "ERR usage: COMMIT <txnId>"
            coord = session.pop(parts[1], None)
            if coord is None:
                return f"ERR no txn {parts[1]} on this connection"
            result = coord.commit()
            return f"OK {result.ct}" if result.committed else "CONFLICT"
        if cmd == "ABORT":
            if len(parts) != 2:
                return "ERR usage: ABORT <txnId>"
            coord = session.pop(parts[1], None)
            if coord is None:
                return f"ERR no txn {parts[1]} on this connection"
            coord.abort()
            return "OK"
        return f"ERR unknown command {parts[0]!r}"
    except (TransactionError, WindowError, StoreError, ValueError) as exc:
        return f"ERR {exc}".replace("\n", " ")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        session: dict[str, TransactionCoordinator] = {}
        try:
            for raw in self.rfile:
                reply = handle_line(self.server.manager, session,
                                    raw.decode("utf-8", "replace").rstrip("\r\n"))
                self.wfile.write(reply.encode("utf-8") + b"\n")
                self.wfile.flush()
        finally:
            for coord in session.values():
                try:
                    coord.abort()
                except (TransactionError, StoreError):
                    pass


class LineProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], manager: TransactionManager):
        super().__init__(addr, _Handler)
        self.manager = manager


def serve(addr: tuple[str, int], manager: TransactionManager) -> None:
    """Run until interrupted."""
    with LineProtocolServer(addr, manager) as server:
        server.serve_forever()
