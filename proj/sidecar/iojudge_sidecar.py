# Copyright 2026 The iojudge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Interpreter sidecar: runs and disassembles Python programs.

Reads one JSON request per line on stdin and writes one JSON response per
line on stdout. See docs/sidecar_protocol.md for the message formats.
"""

import dis
import json
import os
import platform
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
import time
import types

# Runs inside the sandboxed child. Any attempt to write files, open sockets
# or spawn processes terminates the program with status 126.
_BOOT = r"""
import os, sys
_path = sys.argv[1]
with open(_path, encoding="utf-8") as _fh:
    _code = _fh.read()
sys.argv = ["<program>"]
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_APPEND | os.O_TRUNC
_BLOCKED_PREFIXES = ("socket.", "subprocess.", "os.exec", "os.fork", "os.posix_spawn",
                     "os.spawn", "os.system", "os.remove", "os.rename", "os.rmdir",
                     "os.mkdir", "os.unlink", "os.chmod", "os.chown", "os.truncate",
                     "os.symlink", "os.link", "os.kill", "shutil.", "ctypes.",
                     "pty.", "os.putenv", "os.startfile", "urllib.", "ftplib.",
                     "http.", "smtplib.", "poplib.", "imaplib.", "nntplib.", "telnetlib.")

def _deny(event):
    sys.stderr.write("sandbox: blocked " + event + "\n")
    sys.stderr.flush()
    os._exit(126)

def _hook(event, args):
    if event == "open":
        mode = args[1] if len(args) > 1 else None
        flags = args[2] if len(args) > 2 else 0
        if isinstance(mode, str) and any(c in mode for c in "wax+"):
            _deny(event)
        if mode is None and isinstance(flags, int) and flags & _WRITE_FLAGS:
            _deny(event)
    elif event.startswith(_BLOCKED_PREFIXES):
        _deny(event)

sys.addaudithook(_hook)
del _fh
exec(compile(_code, "<program>", "exec"), {"__name__": "__main__", "__builtins__": __builtins__})
"""


def _limits(memory_cap):
    def apply():
        resource.setrlimit(resource.RLIMIT_AS, (memory_cap, memory_cap))
        resource.setrlimit(resource.RLIMIT_FSIZE, (0, 0))
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    return apply


def handle_run(req):
    code = req["code"]
    stdin = req.get("stdin", "")
    timeout = float(req.get("timeout", 5.0))
    memory_cap = int(req.get("memory_cap", 256 * 1024 * 1024))
    if not isinstance(code, str) or not isinstance(stdin, str):
        raise ValueError("code and stdin must be strings")
    if timeout <= 0 or memory_cap <= 0:
        raise ValueError("limits must be positive")
    workdir = tempfile.mkdtemp(prefix="iojudge-run-")
    try:
        path = os.path.join(workdir, "program.py")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(code)
        env = {"PYTHONHASHSEED": "0", "PYTHONIOENCODING": "utf-8", "PATH": "/usr/bin:/bin",
               "LC_ALL": "C.UTF-8"}
        start = time.monotonic()
        proc = subprocess.Popen(
            [sys.executable, "-I", "-S", "-B", "-c", _BOOT, path],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            cwd=workdir, env=env, preexec_fn=_limits(memory_cap), start_new_session=True)
        timed_out = False
        try:
            out, _ = proc.communicate(stdin.encode("utf-8"), timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            out, _ = proc.communicate()
        wall = time.monotonic() - start
        return {"stdout": out.decode("utf-8", errors="replace"),
                "exit_status": proc.returncode if proc.returncode is not None else -9,
                "wall_time": round(wall, 6),
                "timed_out": timed_out}
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _flatten(code, ops):
    for ins in dis.get_instructions(code):
        ops.append([ins.opcode, ins.opname])
    for const in code.co_consts:
        if isinstance(const, types.CodeType):
            _flatten(const, ops)


def handle_disassemble(req):
    code = req["code"]
    if not isinstance(code, str):
        raise ValueError("code must be a string")
    try:
        compiled = compile(code, "<program>", "exec", dont_inherit=True)
    except (SyntaxError, ValueError) as exc:
        return None, "%s: %s" % (type(exc).__name__, exc)
    ops = []
    _flatten(compiled, ops)
    return {"ops": ops}, None


def handle_version(_req):
    return {"python": platform.python_version(),
            "implementation": platform.python_implementation().lower()}


def respond(obj):
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    sys.stdout.flush()


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req_id = None
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("request must be a JSON object")
            req_id = req.get("id")
            kind = req.get("kind")
            if kind == "run":
                respond({"id": req_id, "ok": True, "result": handle_run(req)})
            elif kind == "disassemble":
                result, error = handle_disassemble(req)
                if error is None:
                    respond({"id": req_id, "ok": True, "result": result})
                else:
                    respond({"id": req_id, "ok": False, "error": error})
            elif kind == "version":
                respond({"id": req_id, "ok": True, "result": handle_version(req)})
            else:
                raise ValueError("unknown request kind: %r" % (kind,))
        except (KeyError, ValueError, TypeError) as exc:
            respond({"id": req_id, "ok": False, "error": "protocol error: %s" % exc})


if __name__ == "__main__":
    main()
