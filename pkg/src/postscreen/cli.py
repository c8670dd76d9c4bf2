"""Command-line client for the postscreen service.

Every command builds a request and posts it to the service API. By
default the app runs in-process (no server needed); pass --server URL
to talk to a remote instance instead. Exit codes: 0 success, 1 config
error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import parse_override
from .errors import ConfigError, PostscreenError

EXIT_BY_KIND = {"config": 1, "data": 2, "internal": 3}


def _open_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette nags about its httpx backend; harmless for the
        # in-process transport
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _fail(kind: str, message: str):
    click.echo(f"error ({kind}): {message}", err=True)
    sys.exit(EXIT_BY_KIND.get(kind, 3))


def _call(server: str | None, path: str, payload: dict) -> dict:
    try:
        with _open_client(server) as client:
            response = client.post(path, json=payload)
    except PostscreenError as exc:
        _fail(exc.kind, str(exc))
    except Exception as exc:  # connection failures against --server
        _fail("internal", f"service call failed: {exc}")
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except Exception:
        detail = None
    if isinstance(detail, dict) and "kind" in detail:
        _fail(detail["kind"], detail.get("message", ""))
    if isinstance(detail, list):  # request-model validation: a config problem
        fields = "; ".join(
            f"{'.'.join(str(p) for p in err.get('loc', [])[1:])}: {err.get('msg')}"
            for err in detail
        )
        _fail("config", f"invalid request: {fields}")
    _fail("internal", f"HTTP {response.status_code}: {response.text[:500]}")


def _config_tree(config_path: str | None, sets: tuple[str, ...], flags: dict) -> dict:
    tree: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            tree = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
    dict_assignments = [parse_override(a) for a in sets]
    for dotted, value in list(flags.items()) + dict_assignments:
        if value is None:
            continue
        node = tree
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override {dotted!r}: not a section")
        node[keys[-1]] = value
    return tree


def common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=str, default=None,
                     help="JSON run-config file."),
        click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                     help="Dotted config override, e.g. --set training.epochs=30."),
        click.option("--task", type=click.Choice(["hostility", "fake_news"]), default=None),
        click.option("--language", type=click.Choice(["hindi", "english"]), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--output-dir", type=str, default=None),
        click.option("--delimiter", type=str, default=None,
                     help="Override dataset delimiter auto-detection."),
        click.option("--train", "train_path", type=str, default=None),
        click.option("--validation", "validation_path", type=str, default=None),
        click.option("--test", "test_path", type=str, default=None),
        click.option("--embeddings", type=str, default=None),
        click.option("--lexicon", type=str, default=None),
    ]
    for decorator in reversed(decorators):
        fn = decorator(fn)
    return fn


def _flags_dict(task, language, seed, output_dir, delimiter, train_path,
                validation_path, test_path, embeddings, lexicon) -> dict:
    return {
        "task": task,
        "language": language,
        "seed": seed,
        "output_dir": output_dir,
        "delimiter": delimiter,
        "paths.train": train_path,
        "paths.validation": validation_path,
        "paths.test": test_path,
        "paths.embeddings": embeddings,
        "paths.lexicon": lexicon,
    }


def _build_config(config_path, sets, **flags) -> dict:
    try:
        return _config_tree(config_path, sets, _flags_dict(**flags))
    except PostscreenError as exc:
        _fail(exc.kind, str(exc))


def _report_lines(reports: dict) -> list[str]:
    lines = []
    for grain in sorted(reports):
        body = reports[grain]
        lines.append(f"{body['task']} [{body['split']}] weighted F1: "
                     f"{body['weighted_f1']:.4f}")
    return lines


@click.group()
@click.option("--server", type=str, default=None, envvar="POSTSCREEN_SERVER",
              help="Service URL; defaults to running the app in-process.")
@click.pass_context
def main(ctx, server):
    """Hostility and fake-news screening for micro-blog posts."""
    ctx.obj = {"server": server}


@main.command()
@common_options
@click.option("--split", type=click.Choice(["train", "validation", "test"]), default=None)
@click.option("--input", "input_path", type=str, default=None,
              help="Clean an id+text file instead of a config split.")
@click.option("--output-name", type=str, default="cleaned.tsv")
@click.pass_context
def preprocess(ctx, config_path, sets, split, input_path, output_name, **flags):
    """Clean a dataset file into tokens plus entity counters."""
    config = _build_config(config_path, sets, **flags)
    payload = {"config": config, "split": split, "input_path": input_path,
               "output_name": output_name}
    data = _call(ctx.obj["server"], "/preprocess/file", payload)
    click.echo(f"cleaned {data['rows']} rows -> {data['output_path']}")


@main.command()
@common_options
@click.pass_context
def train(ctx, config_path, sets, **flags):
    """Train models per the run config; writes model + validation report."""
    config = _build_config(config_path, sets, **flags)
    data = _call(ctx.obj["server"], "/train", {"config": config})
    for line in _report_lines(data["reports"]):
        click.echo(line)
    if data.get("entity_vocab_size") is not None:
        click.echo(f"entity vocabulary: {data['entity_vocab_size']} terms")
    if data.get("pseudo_added") is not None:
        click.echo(f"pseudo-labelled posts added: {data['pseudo_added']}")
    if len(data.get("grid_log", [])) > 1:
        click.echo(f"grid search: {len(data['grid_log'])} candidates "
                   f"(log in {data['output_dir']}/grid_log.jsonl)")
    click.echo(f"model written to {data['model_path']}")


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=str)
@click.option("--split", type=click.Choice(["train", "validation", "test"]),
              default="test", show_default=True)
@click.option("--json", "json_only", is_flag=True,
              help="Print the machine-readable report only.")
@click.option("--force", is_flag=True, help="Ignore checksum mismatches.")
@click.pass_context
def evaluate(ctx, config_path, sets, model_path, split, json_only, force, **flags):
    """Evaluate a trained model on a split."""
    config = _build_config(config_path, sets, **flags)
    payload = {"config": config, "model_path": model_path, "split": split,
               "force": force}
    data = _call(ctx.obj["server"], "/evaluate", payload)
    if json_only:
        click.echo(json.dumps(data["reports"], ensure_ascii=False, sort_keys=True))
        return
    for line in _report_lines(data["reports"]):
        click.echo(line)
    click.echo(f"reports written to {data['output_dir']}")


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=str)
@click.option("--input", "input_path", required=True, type=str,
              help="Input file with id and text columns.")
@click.option("--output-name", type=str, default="predictions.tsv", show_default=True)
@click.option("--force", is_flag=True, help="Ignore checksum mismatches.")
@click.pass_context
def predict(ctx, config_path, sets, model_path, input_path, output_name, force, **flags):
    """Predict labels for an id+text file."""
    config = _build_config(config_path, sets, **flags)
    payload = {"config": config, "model_path": model_path,
               "input_path": input_path, "output_name": output_name, "force": force}
    data = _call(ctx.obj["server"], "/predict/file", payload)
    click.echo(f"{data['rows']} rows predicted, {data['warnings']} warnings "
               f"-> {data['output_path']}")


@main.command()
@common_options
@click.option("--json", "json_only", is_flag=True)
@click.pass_context
def ablate(ctx, config_path, sets, json_only, **flags):
    """Sweep the metadata feature combinations on the validation split."""
    config = _build_config(config_path, sets, **flags)
    data = _call(ctx.obj["server"], "/ablate", {"config": config})
    if json_only:
        click.echo(json.dumps(data["tables"], ensure_ascii=False, sort_keys=True))
        return
    for grain, table in sorted(data["tables"].items()):
        click.echo(f"[{grain}] baseline {table['baseline']}:")
        for row in table["rows"]:
            click.echo(f"  {row['tag']:<12} wF1={row['weighted_f1']:.4f} "
                       f"delta={row['delta']:+.4f}")
    click.echo(f"tables written to {data['output_dir']}")


@main.command()
@common_options
@click.option("--member", "members", multiple=True, type=str,
              help="Model file; repeat per member (overrides config list).")
@click.option("--force", is_flag=True)
@click.option("--json", "json_only", is_flag=True)
@click.pass_context
def ensemble(ctx, config_path, sets, members, force, json_only, **flags):
    """Combine trained models by vote or logical rule and evaluate."""
    config = _build_config(config_path, sets, **flags)
    if members:
        config.setdefault("ensemble", {})["members"] = list(members)
    data = _call(ctx.obj["server"], "/ensemble", {"config": config, "force": force})
    if json_only:
        click.echo(json.dumps(data["reports"], ensure_ascii=False, sort_keys=True))
        return
    click.echo(f"rule: {data['rule']}")
    for line in _report_lines(data["reports"]):
        click.echo(line)
    click.echo(f"reports written to {data['output_dir']}")


@main.command()
@common_options
@click.option("--model", "model_paths", multiple=True, required=True, type=str,
              help="Model file; repeat at least twice.")
@click.option("--split", type=click.Choice(["train", "validation", "test"]),
              default="test", show_default=True)
@click.option("--force", is_flag=True)
@click.pass_context
def audit(ctx, config_path, sets, model_paths, split, force, **flags):
    """Report posts where all models agree against the gold label."""
    config = _build_config(config_path, sets, **flags)
    payload = {"config": config, "model_paths": list(model_paths), "split": split,
               "force": force}
    data = _call(ctx.obj["server"], "/audit", payload)
    click.echo(f"{len(data['items'])} unanimous disagreements "
               f"-> {data['output_path']}")
    for item in data["items"][:10]:
        click.echo(f"  {item['id']}: gold={item['gold']} predicted={item['predicted']} "
                   f"confidence={item['mean_confidence']:.3f}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("postscreen.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
