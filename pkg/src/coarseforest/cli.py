"""Command-line client for the analysis service.

Every command builds a JSON request and sends it to the service: in-process
against the ASGI app by default, or over the network when --server is given.
Exit codes: 0 success, 2 input/validation error, 3 property violation
(NotATree), 4 budget exceeded.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
import time
from pathlib import Path

import click
import httpx

from coarseforest import __version__
from coarseforest.errors import MetricValidationError

EXIT_INPUT = 2
EXIT_PROPERTY = 3
EXIT_BUDGET = 4

_CODE_EXITS = {"NotATree": EXIT_PROPERTY, "BudgetExceeded": EXIT_BUDGET}


def _call(method: str, path: str, payload: dict | None, server: str | None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.request(method, path, json=payload)

    async def _inprocess() -> httpx.Response:
        from coarseforest.service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://coarseforest", timeout=600.0
        ) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(_inprocess())


def _fail(response: httpx.Response) -> None:
    detail = {}
    try:
        detail = response.json().get("detail", {})
    except ValueError:
        pass
    if isinstance(detail, list):  # pydantic request validation
        detail = {"code": "BadRequest", "message": json.dumps(detail)}
    click.echo(json.dumps({"error": detail}, indent=2), err=True)
    sys.exit(_CODE_EXITS.get(detail.get("code", ""), EXIT_INPUT))


def _load_space_payload(path: str) -> dict:
    from coarseforest.files import load_space, space_to_json_dict

    return space_to_json_dict(load_space(path))


def _load_input(path: str) -> dict:
    """Wrap a file as {'space': ...} or {'graph': ...} for the service."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        return {"space": _load_space_payload(path)}
    payload = json.loads(p.read_text())
    if "vertices" in payload:
        return {"graph": {"vertices": payload["vertices"], "edges": payload["edges"]}}
    return {"space": _load_space_payload(path)}


def _parse_levels(text: str | None) -> tuple[int | None, int | None]:
    if not text:
        return None, None
    lo, _, hi = text.partition("..")
    return int(lo), int(hi)


def _parse_f(text: str | None) -> dict:
    if not text or text == "id":
        return {"kind": "id"}
    if text == "level":
        return {"kind": "level"}
    if text.startswith("const:"):
        return {"kind": "const", "value": float(text.split(":", 1)[1])}
    table = json.loads(Path(text).read_text())
    return {"kind": "values", "values": {str(k): float(v) for k, v in table.items()}}


def _write_outputs(out: str | None, graph: dict, dot: str, manifest: dict) -> list[str]:
    if not out:
        return []
    base = Path(out)
    base.parent.mkdir(parents=True, exist_ok=True)
    from coarseforest.files import canonical_json

    targets = {suffix: Path(str(base) + suffix) for suffix in (".json", ".dot", ".manifest.json")}
    manifest["outputs"] = [str(p) for p in targets.values()]
    targets[".json"].write_text(canonical_json(graph))
    targets[".dot"].write_text(dot)
    targets[".manifest.json"].write_text(canonical_json(manifest))
    return manifest["outputs"]


def _manifest(command: str, input_path: str, parameters: dict, started: float) -> dict:
    from coarseforest.files import sha256_file

    return {
        "command": command,
        "input": input_path,
        "inputDigest": sha256_file(input_path),
        "parameters": parameters,
        "elapsedSeconds": time.perf_counter() - started,
        "threadsCap": os.environ.get("COARSE_FOREST_THREADS"),
        "version": __version__,
    }


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Finite-scale hyperbolic approximations, tree quotients and QI reports."""


server_option = click.option(
    "--server", default=None, help="Remote service URL; defaults to in-process."
)


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--tol", default=1e-9, show_default=True, help="Triangle slack.")
@server_option
def validate(input_path: str, tol: float, server: str | None) -> None:
    """Validate a distance matrix or point cloud file."""
    try:
        payload = {"space": _load_space_payload(input_path), "tol": tol}
    except MetricValidationError as exc:
        click.echo(json.dumps({"valid": False, "violation": exc.payload()}, indent=2))
        sys.exit(EXIT_INPUT)
    response = _call("POST", "/metric/validate", payload, server)
    if response.status_code != 200:
        _fail(response)
    body = response.json()
    click.echo(json.dumps(body, indent=2))
    if not body["valid"]:
        sys.exit(EXIT_INPUT)


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--flavor", type=click.Choice(["h", "rh", "rips", "gamma"]), required=True)
@click.option("--r", "r_param", default=None, help="Scale parameter, decimal or 'p/q'.")
@click.option("--t", "t_param", type=float, default=None, help="Rips scale.")
@click.option("--R", "big_r", type=float, default=None, help="Net radius.")
@click.option("--levels", default=None, help="Level window 'a..b'.")
@click.option(
    "--criterion",
    type=click.Choice(["witness", "metric"]),
    default="witness",
    show_default=True,
    help="Ball intersection test for flavor h.",
)
@click.option("--out", default=None, help="Output prefix for .json/.dot/.manifest.json.")
@server_option
def build(input_path, flavor, r_param, t_param, big_r, levels, criterion, out, server):
    """Build a leveled approximation, Rips graph or ball net."""
    started = time.perf_counter()
    k_min, k_max = _parse_levels(levels)
    request: dict = {"flavor": flavor, "criterion": criterion}
    request.update(_load_input(input_path))
    if r_param is not None:
        request["r"] = r_param
    if t_param is not None:
        request["t"] = t_param
    if big_r is not None:
        request["R"] = big_r
    if k_min is not None:
        request["k_min"], request["k_max"] = k_min, k_max
    response = _call("POST", "/build", request, server)
    if response.status_code != 200:
        _fail(response)
    body = response.json()
    manifest = _manifest(f"build --flavor {flavor}", input_path, body["parameters"], started)
    if body.get("report") is not None:
        manifest["report"] = body["report"]
    written = _write_outputs(out, body["graph"], body["dot"], manifest)
    summary = {
        "vertices": len(body["graph"]["vertices"]),
        "edges": len(body["graph"]["edges"]),
        "parameters": body["parameters"],
        "outputs": written,
    }
    if body.get("report") is not None:
        summary["report"] = body["report"]
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option(
    "--op",
    type=click.Choice(["delta", "bottleneck", "levels", "pq", "properness", "expansion"]),
    required=True,
)
@click.option("--r", "r_param", default=None)
@click.option("--D", "hop_bound", type=int, default=None, help="Hop bound for op pq.")
@click.option("--f", "f_spec", default=None, help="id | level | const:<v> | <values.json>.")
@click.option("--N", "half_width", type=float, default=1.0, show_default=True)
@click.option("--band-step", type=float, default=1.0, show_default=True)
@click.option("--thresholds", default=None, help="Comma-separated expansion thresholds.")
@click.option("--budget", type=int, default=None)
@click.option("--exact", is_flag=True, help="Refuse to sample; exit 4 over budget.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Write the report JSON here.")
@server_option
def analyze(
    input_path, op, r_param, hop_bound, f_spec, half_width, band_step,
    thresholds, budget, exact, seed, out, server,
):
    """Run an analysis and print its JSON report."""
    request: dict = {
        "op": op,
        "seed": seed,
        "exact": exact,
        "half_width": half_width,
        "band_step": band_step,
    }
    request.update(_load_input(input_path))
    if r_param is not None:
        request["r"] = r_param
    if hop_bound is not None:
        request["D"] = hop_bound
    if budget is not None:
        request["budget"] = budget
    if thresholds:
        request["thresholds"] = [float(x) for x in thresholds.split(",")]
    if f_spec is not None:
        request["f"] = _parse_f(f_spec)
    response = _call("POST", "/analyze", request, server)
    if response.status_code != 200:
        _fail(response)
    body = response.json()
    text = json.dumps(body, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--f", "f_spec", default="id", show_default=True,
              help="id | level | const:<v> | <values.json>.")
@click.option("--R", "big_r", type=float, default=None, help="Net radius for metric input.")
@click.option("--budget", type=int, default=250_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Output prefix for tree artifacts.")
@server_option
def treeify(input_path, f_spec, big_r, budget, seed, out, server):
    """Quotient a graph (or metric space) to a tree and report QI constants."""
    started = time.perf_counter()
    request: dict = {"f": _parse_f(f_spec), "budget": budget, "seed": seed}
    request.update(_load_input(input_path))
    if big_r is not None:
        request["R"] = big_r
    response = _call("POST", "/treeify", request, server)
    if response.status_code != 200:
        _fail(response)
    body = response.json()
    manifest = _manifest("treeify", input_path, {"f": f_spec, "seed": seed}, started)
    manifest["run"] = body["manifest"]
    written = _write_outputs(out, body["tree"], body["dot"], manifest)
    summary = {
        "treeVertices": len(body["tree"]["vertices"]),
        "treeEdges": len(body["tree"]["edges"]),
        "qi": body["manifest"]["qi"],
        "constants": body["manifest"]["constants"],
        "outputs": written,
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8337, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the analysis service."""
    import uvicorn

    uvicorn.run("coarseforest.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
