"""User client: log in once, then run tools by service id.

``run`` resolves the tool transparently: if config.json maps the service
id to an existing executable, the job is staged and executed locally with
no portal round trip at all; otherwise it is submitted through the
front-end broker with the cached token. Either way the same command line
produces the same output files under --out.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
import tempfile
import uuid
from pathlib import Path

import httpx

from sselab import errors, wire
from sselab.cli import config as cfg
from sselab.model import PluginManifest, ServiceCategory, semver_key
from sselab.ostp import executor as jobs

EXIT_OK = 0
EXIT_JOB_FAILED = 1
EXIT_AUTH = 2
EXIT_NO_SERVICE = 3

REQUEST_TIMEOUT_S = 120.0


def coerce_param(value: str):
    """Param values are JSON when they parse as JSON, else plain strings."""
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise SystemExit("--param expects key=value, got %r" % pair)
        params[key] = coerce_param(value)
    return params


def resolve_tool(tools: dict, service_id: str) -> Path | None:
    """Local executable for the service, or None when the run must go remote."""
    raw = tools.get(service_id)
    if not raw:
        return None
    path = Path(str(raw)).expanduser()
    if path.is_file() and os.access(path, os.X_OK):
        return path
    return None


def login_remote(client: httpx.Client, url: str, username: str, password: str) -> str:
    response = client.post(url + "/api/auth/login",
                           json={"username": username, "password": password})
    wire.raise_for_api_error(response)
    doc = response.json()
    cfg.save_token(url, doc["token"], doc["expires_at"])
    return doc["token"]


def prompt_login(client: httpx.Client, url: str) -> str | None:
    if not sys.stdin.isatty():
        return None
    username = input("username: ")
    password = getpass.getpass("password: ")
    try:
        return login_remote(client, url, username, password)
    except errors.ApiError as exc:
        print("login failed: %s" % exc.message, file=sys.stderr)
        return None


def cmd_login(args) -> int:
    url = cfg.frontend_url(cfg.load_config(), args.url)
    username = args.username
    password = args.password
    if username is None or password is None:
        if not sys.stdin.isatty():
            print("login needs --username and --password when not on a terminal",
                  file=sys.stderr)
            return EXIT_AUTH
        username = username or input("username: ")
        password = password or getpass.getpass("password: ")
    with httpx.Client(timeout=REQUEST_TIMEOUT_S) as client:
        try:
            login_remote(client, url, username, password)
        except (httpx.TransportError, errors.ApiError) as exc:
            print("login failed: %s" % exc, file=sys.stderr)
            return EXIT_AUTH
    print(json.dumps({"frontend_url": url, "username": username}, sort_keys=True))
    return EXIT_OK


def write_outputs(out_dir: Path, named_bytes) -> None:
    for name, data in named_bytes:
        jobs.check_input_name(name)
        target = out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)


def run_local(executable: Path, service_id: str, version: str | None,
              params: dict, inputs, out_dir: Path, timeout_s: float | None) -> int:
    manifest = PluginManifest(
        id=service_id,
        version=version or "0.0.0",
        category=ServiceCategory.OSTP,
        entry=executable.name,
    )
    with tempfile.TemporaryDirectory(prefix="sselab-job-") as tmp:
        job_id = uuid.uuid4().hex
        job_dir = jobs.stage_job(Path(tmp), job_id, params, tuple(inputs))
        status, exit_code, stdout_log, stderr_log = jobs.invoke(
            manifest, executable.parent, job_dir, job_id, timeout_s or 60.0)
        names = jobs.collect_outputs(job_dir)
        result = {
            "job_id": job_id,
            "service_id": service_id,
            "version": manifest.version,
            "status": status,
            "outputs": list(names),
            "stdout_log": stdout_log,
            "stderr_log": stderr_log,
        }
        if exit_code is not None:
            result["exit_code"] = exit_code
        if status != "succeeded":
            sys.stderr.write(stderr_log)
            print(json.dumps(result, sort_keys=True))
            return EXIT_JOB_FAILED
        write_outputs(out_dir, ((n, (job_dir / "outputs" / n).read_bytes())
                                for n in names))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def latest_remote_version(client: httpx.Client, url: str, token: str,
                          service_id: str) -> str | None:
    response = client.get(url + "/api/plugins", params={"category": "ostp"},
                          headers={"Authorization": "Bearer " + token})
    wire.raise_for_api_error(response)
    versions = [p["version"] for p in response.json() if p["id"] == service_id]
    if not versions:
        return None
    return max(versions, key=semver_key)


def run_remote(service_id: str, version: str | None, params: dict,
               inputs, out_dir: Path, timeout_s: float | None, url: str) -> int:
    with httpx.Client(timeout=REQUEST_TIMEOUT_S) as client:
        token = cfg.load_token(url)
        if token is None:
            token = prompt_login(client, url)
        if token is None:
            print("not logged in; run `sselab login` first", file=sys.stderr)
            return EXIT_AUTH
        try:
            if version is None:
                version = latest_remote_version(client, url, token, service_id)
                if version is None:
                    print("no such service: %s" % service_id, file=sys.stderr)
                    return EXIT_NO_SERVICE
            submit_url = "%s/api/ostp/%s/%s/jobs" % (url, service_id, version)
            query = {"timeout_s": str(timeout_s)} if timeout_s else None
            response = client.post(submit_url, params=query,
                                   files=wire.job_payload(params, inputs),
                                   headers={"Authorization": "Bearer " + token})
            wire.raise_for_api_error(response)
            result = response.json()
            if result.get("status") != "succeeded":
                sys.stderr.write(result.get("stderr_log", ""))
                print(json.dumps(result, sort_keys=True))
                return EXIT_JOB_FAILED
            downloads = []
            for name in result.get("outputs", []):
                output = client.get(
                    "%s/api/ostp/jobs/%s/outputs/%s" % (url, result["job_id"], name),
                    headers={"Authorization": "Bearer " + token})
                wire.raise_for_api_error(output)
                downloads.append((name, output.content))
            write_outputs(out_dir, downloads)
            print(json.dumps(result, sort_keys=True))
            return EXIT_OK
        except errors.ApiError as exc:
            print("%s: %s" % (exc.code, exc.message), file=sys.stderr)
            if exc.code in ("Unauthorized", "BadCredentials", "AccountLocked"):
                return EXIT_AUTH
            if exc.code in ("NoSuchService", "NoSuchPlugin", "NotFound"):
                return EXIT_NO_SERVICE
            return EXIT_JOB_FAILED
        except httpx.TransportError as exc:
            print("cannot reach %s: %s" % (url, exc), file=sys.stderr)
            return EXIT_JOB_FAILED


def cmd_run(args) -> int:
    config = cfg.load_config()
    url = cfg.frontend_url(config, args.url)
    params = parse_params(args.param)
    inputs = []
    for raw in args.infile or []:
        path = Path(raw)
        if not path.is_file():
            print("input file missing: %s" % raw, file=sys.stderr)
            return EXIT_JOB_FAILED
        inputs.append((path.name, path.read_bytes()))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    local = resolve_tool(cfg.local_tools(config), args.service_id)
    if local is not None:
        return run_local(local, args.service_id, args.version, params,
                         inputs, out_dir, args.timeout)
    return run_remote(args.service_id, args.version, params, inputs,
                      out_dir, args.timeout, url)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sselab", description="Run portal tools locally or remotely.")
    parser.add_argument("--url", default=None, help="front-end URL override")
    sub = parser.add_subparsers(dest="command", required=True)

    login = sub.add_parser("login", help="cache an API token")
    login.add_argument("--username", default=None)
    login.add_argument("--password", default=None)

    run = sub.add_parser("run", help="run a tool service")
    run.add_argument("service_id")
    run.add_argument("--version", default=None)
    run.add_argument("--in", dest="infile", action="append", metavar="FILE",
                     help="input file; repeatable")
    run.add_argument("--param", action="append", metavar="KEY=VALUE",
                     help="tool parameter; repeatable, values parsed as JSON")
    run.add_argument("--out", required=True, help="directory for output files")
    run.add_argument("--timeout", type=float, default=None,
                     help="job timeout in seconds")

    args = parser.parse_args(argv)
    if args.command == "login":
        return cmd_login(args)
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
