"""Command-line interface; a thin client over the HTTP service.

Every subcommand builds a request, sends it to the service, and prints
the response.  By default a fresh service runs in-process, so no network
or daemon is involved; pass --server (or set EARLYBEAM_SERVER) to talk
to one started with ``earlybeam serve``.

Exit codes: 0 success, 1 rejected input (4xx), 2 service failure.
"""

from __future__ import annotations

import asyncio
import json as jsonlib

import click
import httpx

from .service import create_app


class ApiError(Exception):
    """Non-2xx response from the service."""

    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def call_api(server: str | None, method: str, path: str, payload: dict | None = None) -> dict:
    """One request against a remote server or a fresh in-process app."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.request(method, path, json=payload)
    else:

        async def in_process() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app(), raise_app_exceptions=False)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://earlybeam.local", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        resp = asyncio.run(in_process())
    if resp.status_code >= 400:
        try:
            detail = str(resp.json().get("detail", resp.text))
        except ValueError:
            detail = resp.text
        raise ApiError(resp.status_code, detail)
    return resp.json()


def _invoke(server: str | None, method: str, path: str, payload: dict | None = None) -> dict:
    try:
        return call_api(server, method, path, payload)
    except ApiError as exc:
        click.echo(f"error: {exc.detail}", err=True)
        raise SystemExit(1 if exc.status < 500 else 2)
    except httpx.HTTPError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(2)


def _params_options(fn):
    for opt in reversed(
        [
            click.option("--params-file", default=None, help="Proposer parameters JSON."),
            click.option("--kappa", type=float, default=None),
            click.option("--window", type=int, default=None),
            click.option("--mad-threshold", type=float, default=None),
            click.option("--gap", type=int, default=None),
            click.option("--blur-kernel", type=int, default=None),
            click.option("--blur-sigma", type=float, default=None),
            click.option("--downscale", type=float, default=None),
        ]
    ):
        fn = opt(fn)
    return fn


_PARAM_FIELDS = ("kappa", "window", "mad_threshold", "gap", "blur_kernel", "blur_sigma", "downscale")


def _params_payload(kw: dict) -> dict | None:
    patch = {k: kw[k] for k in _PARAM_FIELDS if kw.get(k) is not None}
    return patch or None


def _config_options(fn):
    for opt in reversed(
        [
            click.option("--config-file", default=None, help="Pipeline config JSON."),
            click.option("--params-file", default=None, help="Proposer parameters JSON."),
            click.option("--model-file", default=None, help="Trained classifier model."),
            click.option("--calibration-file", default=None),
            click.option("--road-file", default=None),
            click.option("--method", default=None, help="GP, PSD-3D, or PSD-2D."),
            click.option("--heuristic", default=None),
            click.option("--classifier-threshold", type=float, default=None),
            click.option("--output-confidence", type=float, default=None),
            click.option("--fps", type=float, default=None),
        ]
    ):
        fn = opt(fn)
    return fn


_CONFIG_FIELDS = (
    "config_file",
    "params_file",
    "model_file",
    "calibration_file",
    "road_file",
    "method",
    "heuristic",
    "classifier_threshold",
    "output_confidence",
    "fps",
)


def _config_payload(kw: dict) -> dict:
    return {k: kw[k] for k in _CONFIG_FIELDS if kw.get(k) is not None}


_json_flag = click.option("--json", "as_json", is_flag=True, help="Print the raw response.")


def _dump(data: dict) -> None:
    click.echo(jsonlib.dumps(data, indent=2))


@click.group()
@click.option(
    "--server",
    default=None,
    envvar="EARLYBEAM_SERVER",
    metavar="URL",
    help="Base URL of a running service; default runs in-process.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Nighttime light-artifact detection, localization, and tracking."""
    ctx.obj = server


@main.command()
@click.argument("image")
@_params_options
@_json_flag
@click.pass_obj
def propose(obj, image, as_json, **kw):
    """Print light-artifact proposal boxes for one image."""
    payload = {"image_path": image, "params_file": kw.get("params_file"), "params": _params_payload(kw)}
    data = _invoke(obj, "POST", "/propose", payload)
    if as_json:
        _dump(data)
        return
    for box in data["boxes"]:
        click.echo(f"{box['x_min']:g} {box['y_min']:g} {box['x_max']:g} {box['y_max']:g}")


@main.command()
@click.argument("image")
@_params_options
@click.option("--model-file", default=None, help="Trained classifier; default scores peak brightness.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--enlarge-factor", type=float, default=1.5, show_default=True)
@_json_flag
@click.pass_obj
def detect(obj, image, model_file, threshold, enlarge_factor, as_json, **kw):
    """Propose and classify: print scored boxes for one image."""
    payload = {
        "image_path": image,
        "params_file": kw.get("params_file"),
        "params": _params_payload(kw),
        "model_file": model_file,
        "threshold": threshold,
        "enlarge_factor": enlarge_factor,
    }
    data = _invoke(obj, "POST", "/detect", payload)
    if as_json:
        _dump(data)
        return
    for det in data["detections"]:
        b = det["box"]
        line = (
            f"{b['x_min']:g} {b['y_min']:g} {b['x_max']:g} {b['y_max']:g} "
            f"{det['score']:.4f} {int(det['label'])}"
        )
        if det.get("error"):
            line += f"  # {det['error']}"
        click.echo(line)


@main.command()
@click.option("--pixel", nargs=2, type=float, default=None, help="Image point u v.")
@click.option("--box", nargs=4, type=float, default=None, help="Box x_min y_min x_max y_max.")
@click.option("--calibration-file", default=None)
@click.option("--road-file", default=None)
@click.option("--method", default="GP", show_default=True)
@click.option("--heuristic", default="max", show_default=True)
@click.option("--subsample", type=int, default=2, show_default=True)
@_json_flag
@click.pass_obj
def localize(obj, pixel, box, calibration_file, road_file, method, heuristic, subsample, as_json):
    """Estimate the 3-D source point of a pixel or a box."""
    payload = {
        "pixel": list(pixel) if pixel else None,
        "box": {"x_min": box[0], "y_min": box[1], "x_max": box[2], "y_max": box[3]} if box else None,
        "calibration_file": calibration_file,
        "road_file": road_file,
        "method": method,
        "heuristic": heuristic,
        "subsample": subsample,
    }
    data = _invoke(obj, "POST", "/localize", payload)
    if as_json:
        _dump(data)
        return
    x, y, z = data["point"]
    click.echo(f"point {x:.3f} {y:.3f} {z:.3f}")
    click.echo(f"distance_m {data['distance_m']:.3f}")


@main.command()
@click.argument("dataset_root")
@click.option("--split", default=None, help="Restrict to one split.")
@click.option("--results", "results_path", default=None, help="Write per-track records here.")
@_config_options
@_json_flag
@click.pass_obj
def track(obj, dataset_root, split, results_path, as_json, **kw):
    """Run the full chain over a dataset and summarize tracks."""
    payload = {
        "dataset_root": dataset_root,
        "split": split,
        "config": _config_payload(kw),
        "results_path": results_path,
    }
    data = _invoke(obj, "POST", "/pipeline/run", payload)
    if as_json:
        _dump(data)
        return
    for s in data["sequences"]:
        first = s["first_emission_frame"]
        click.echo(
            f"{s['sequence_id']}: {s['frames']} frames, {s['failed_frames']} failed, "
            f"{s['emitting_frames']} emitting, first emission "
            f"{first if first is not None else '-'}"
        )
    if data["results_path"]:
        click.echo(f"results written to {data['results_path']}")


@main.command()
@click.argument("dataset_root")
@click.option("--split", default=None)
@click.option(
    "--mode",
    default="proposals",
    show_default=True,
    type=click.Choice(["proposals", "detections", "tracks"]),
)
@click.option("--metrics", "metrics_path", default=None, help="Write the report JSON here.")
@_config_options
@_json_flag
@click.pass_obj
def evaluate(obj, dataset_root, split, mode, metrics_path, as_json, **kw):
    """Score predictions against keypoint annotations."""
    payload = {
        "dataset_root": dataset_root,
        "split": split,
        "mode": mode,
        "config": _config_payload(kw),
        "metrics_path": metrics_path,
    }
    data = _invoke(obj, "POST", "/evaluate", payload)
    if as_json:
        _dump(data)
        return
    click.echo(data["table"])


@main.command()
@click.argument("dataset_root")
@click.option("--budget", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sampler", default="tpe", show_default=True, type=click.Choice(["tpe", "random"]))
@click.option("--train-split", default="train", show_default=True)
@click.option("--val-split", default="val", show_default=True)
@click.option("--test-split", default="test", show_default=True)
@click.option("--params-file", default=None, help="Base parameters for fields outside the search space.")
@click.option("--log", "log_path", default=None, help="Append one JSON line per trial here.")
@click.option("--best", "best_path", default=None, help="Write the winning parameters here.")
@_json_flag
@click.pass_obj
def tune(obj, dataset_root, budget, seed, sampler, train_split, val_split, test_split, params_file, log_path, best_path, as_json):
    """Search proposer parameters to minimize 1 - q."""
    payload = {
        "dataset_root": dataset_root,
        "budget": budget,
        "seed": seed,
        "sampler": sampler,
        "train_split": train_split,
        "val_split": val_split,
        "test_split": test_split or None,
        "params_file": params_file,
        "log_path": log_path,
        "best_path": best_path,
    }
    data = _invoke(obj, "POST", "/tune", payload)
    if as_json:
        _dump(data)
        return
    click.echo(f"best trial {data['best_index']} of {data['trials']}")
    for key, value in data["best_params"].items():
        click.echo(f"{key} = {value}")
    click.echo(f"val objective {data['best_val_objective']:.4f}")
    if data["test_objective"] is not None:
        click.echo(f"test objective {data['test_objective']:.4f}")


@main.command()
@click.argument("out_root")
@click.option("--sequences", type=int, default=1, show_default=True)
@click.option("--split", default="train", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--frames", "frame_count", type=int, default=30, show_default=True)
@click.option("--width", "image_width", type=int, default=1280, show_default=True)
@click.option("--height", "image_height", type=int, default=960, show_default=True)
@click.option("--start-distance", type=float, default=150.0, show_default=True)
@click.option("--approach", type=float, default=1.0, show_default=True, help="Meters per frame.")
@click.option("--indirect-from", type=int, default=0, show_default=True)
@click.option("--direct-from", type=int, default=15, show_default=True)
@click.option("--noise", type=float, default=0.01, show_default=True)
@_json_flag
@click.pass_obj
def synth(obj, out_root, sequences, split, seed, frame_count, image_width, image_height, start_distance, approach, indirect_from, direct_from, noise, as_json):
    """Render synthetic approach sequences with exact ground truth."""
    payload = {
        "out_root": out_root,
        "sequences": sequences,
        "split": split,
        "seed": seed,
        "frame_count": frame_count,
        "image_width": image_width,
        "image_height": image_height,
        "start_distance_m": start_distance,
        "approach_m_per_frame": approach,
        "indirect_from_frame": indirect_from,
        "direct_from_frame": direct_from,
        "noise_sigma": noise,
    }
    data = _invoke(obj, "POST", "/synth", payload)
    if as_json:
        _dump(data)
        return
    ids = ", ".join(data["sequence_ids"])
    click.echo(f"wrote {len(data['sequence_ids'])} sequence(s) under {data['root']}: {ids}")


@main.command()
@click.argument("dataset_root")
@click.option("--split", default=None)
@_config_options
@_json_flag
@click.pass_obj
def bench(obj, dataset_root, split, as_json, **kw):
    """Time every stage over a dataset against the frame budget."""
    payload = {"dataset_root": dataset_root, "split": split, "config": _config_payload(kw)}
    data = _invoke(obj, "POST", "/bench", payload)
    if as_json:
        _dump(data)
        return
    click.echo(data["table"])


@main.command()
@click.argument("dataset_root")
@click.argument("sequence_id")
@click.argument("out_dir")
@click.option("--mode", default="tracks", show_default=True, type=click.Choice(["proposals", "tracks"]))
@_config_options
@_json_flag
@click.pass_obj
def overlay(obj, dataset_root, sequence_id, out_dir, mode, as_json, **kw):
    """Render annotated frames of one sequence to a directory."""
    payload = {
        "dataset_root": dataset_root,
        "sequence_id": sequence_id,
        "out_dir": out_dir,
        "mode": mode,
        "config": _config_payload(kw),
    }
    data = _invoke(obj, "POST", "/overlay", payload)
    if as_json:
        _dump(data)
        return
    click.echo(f"wrote {data['written']} overlay(s) to {data['out_dir']}")


@main.command("convert-pvdn")
@click.argument("pvdn_root")
@click.argument("out_root")
@click.option("--illumination", default="day", show_default=True)
@_json_flag
@click.pass_obj
def convert_pvdn_cmd(obj, pvdn_root, out_root, illumination, as_json):
    """Convert a PVDN-style dataset tree to the native layout."""
    payload = {"pvdn_root": pvdn_root, "out_root": out_root, "illumination": illumination}
    data = _invoke(obj, "POST", "/convert-pvdn", payload)
    if as_json:
        _dump(data)
        return
    click.echo(f"converted {data['sequences']} sequence(s) into {data['out_root']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
