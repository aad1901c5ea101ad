"""Command line entry point: ``groundmix <command> ...``."""

from __future__ import annotations

import json
import logging
import statistics
import sys
from collections import Counter
from contextlib import contextmanager
from pathlib import Path

import click
import yaml

from . import grpo
from .harness.mixing import MixError, mix_datasets, plan_mix
from .harness.serve import score_lines, serve_scoring, serve_socket
from .harness.suite import DEFAULT_CASES, run_reward_suite
from .ingest import DEFAULT_MIN_EDGE, GroundingPool, build_pool
from .io import POOL_SCHEMA, SAMPLE_SCHEMA, SchemaError, dumps, read_jsonl, write_jsonl
from .synth.inter import DEFAULT_K, synth_inter_dataset
from .synth.intra import synth_intra_dataset
from .synth.materialize import materialize as materialize_samples
from .synth.samples import MultiImageSample
from .synth.templates import TemplatePool

logger = logging.getLogger("groundmix")


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _resolve(ctx: click.Context, name: str, value, fallback=None):
    if value is not None:
        return value
    obj = ctx.find_root().obj or {}
    return obj.get(name) if obj.get(name) is not None else fallback


def _templates(path):
    return TemplatePool.load(path) if path else TemplatePool.default()


def _load_pool(path) -> GroundingPool:
    return GroundingPool.from_records(read_jsonl(path))


def _load_samples(path) -> list[MultiImageSample]:
    return [MultiImageSample.from_dict(d) for d in read_jsonl(path)]


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=int, default=None, help="Default seed for commands that take one.")
@click.option("--out", type=click.Path(), default=None, help="Default output path.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML file of per-command option defaults, keyed by command name.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, seed, out, config, verbose):
    """Synthesize multi-image grounding data and score grounding responses."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"seed": seed, "out": out}
    if config:
        with open(config, encoding="utf-8") as fh:
            ctx.default_map = yaml.safe_load(fh) or {}


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--min-edge", type=int, default=DEFAULT_MIN_EDGE, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def ingest(ctx, input_path, min_edge, out):
    """Unify and filter source annotations into a pool file."""
    out = _resolve(ctx, "out", out)
    try:
        pool, report = build_pool(_iter_source(input_path), min_edge)
    except OSError as exc:
        raise click.ClickException(f"cannot read {input_path}: {exc}")
    with _output(out) as fh:
        write_jsonl(pool.to_records(), fh=fh)
    click.echo(dumps(report.to_dict()), err=True)


def _iter_source(path):
    # malformed lines are passed through so build_pool can count them
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                yield {"__malformed__": line}


@main.group()
def synth():
    """Generate inter- or intra-image contrast samples."""


@synth.command("inter")
@click.option("--pool", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_samples", required=True, type=int)
@click.option("--k", type=int, default=DEFAULT_K, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--templates", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def synth_inter(ctx, pool, n_samples, k, seed, templates, out):
    seed = _resolve(ctx, "seed", seed, 0)
    samples = synth_inter_dataset(_load_pool(pool), n_samples, k, _templates(templates), seed)
    with _output(_resolve(ctx, "out", out)) as fh:
        write_jsonl((s.to_dict() for s in samples), fh=fh)


@synth.command("intra")
@click.option("--pool", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_samples", required=True, type=int)
@click.option("--seed", type=int, default=None)
@click.option("--templates", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def synth_intra(ctx, pool, n_samples, seed, templates, out):
    seed = _resolve(ctx, "seed", seed, 0)
    samples = synth_intra_dataset(_load_pool(pool), n_samples, _templates(templates), seed)
    with _output(_resolve(ctx, "out", out)) as fh:
        write_jsonl((s.to_dict() for s in samples), fh=fh)


@main.command()
@click.option("--samples", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(), default=None, help="Directory for crops and samples.jsonl.")
@click.pass_context
def materialize(ctx, samples, images, out):
    """Cut crop views out of source images."""
    out = _resolve(ctx, "out", out)
    if out is None:
        raise click.UsageError("--out directory is required")
    done = materialize_samples(_load_samples(samples), images, out)
    write_jsonl((s.to_dict() for s in done), Path(out) / "samples.jsonl")


@main.command()
@click.option("--inter", "inter_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--intra", "intra_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--no-ratio-check", is_flag=True, help="Allow unequal branch sizes.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def mix(ctx, inter_path, intra_path, seed, no_ratio_check, out):
    """Shuffle inter and intra samples into one training file (1:1)."""
    seed = _resolve(ctx, "seed", seed, 0)
    try:
        mixed = mix_datasets(_load_samples(inter_path), _load_samples(intra_path), seed, not no_ratio_check)
    except MixError as exc:
        raise click.ClickException(str(exc))
    with _output(_resolve(ctx, "out", out)) as fh:
        write_jsonl((s.to_dict() for s in mixed), fh=fh)


@main.command()
@click.option("--pairs", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Score requests, one JSON object per line.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def score(ctx, pairs, out):
    """Batch-score (ground truth, response) pairs."""
    n = errors = 0
    total = 0.0
    with open(pairs, encoding="utf-8") as src, _output(_resolve(ctx, "out", out)) as fh:
        for reply in score_lines(src):
            fh.write(dumps(reply) + "\n")
            n += 1
            if "error" in reply:
                errors += 1
            else:
                total += reply["total"]
    mean = total / (n - errors) if n > errors else 0.0
    click.echo(dumps({"scored": n - errors, "errors": errors, "mean_total": mean}), err=True)


@main.command()
@click.option("--socket", "socket_path", type=click.Path(), default=None,
              help="Serve on a local socket instead of stdin/stdout.")
def serve(socket_path):
    """Long-running scoring loop over line-delimited JSON."""
    if socket_path:
        server = serve_socket(socket_path)
        click.echo(f"listening on {socket_path}", err=True)
        try:
            server.serve_forever()
        finally:
            server.server_close()
    else:
        serve_scoring(sys.stdin, sys.stdout)


@main.command("grpo-eval")
@click.option("--groups", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--epsilon", type=float, default=grpo.DEFAULT_EPSILON, show_default=True)
@click.option("--beta", type=float, default=grpo.DEFAULT_BETA, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def grpo_eval(ctx, groups, epsilon, beta, out):
    """Per-group advantages, skip flags and clipped objective."""
    cfg = grpo.GrpoConfig(epsilon=epsilon, beta=beta)
    with _output(_resolve(ctx, "out", out)) as fh:
        for lineno, rec in enumerate(read_jsonl(groups), 1):
            try:
                result = grpo.group_objective(grpo.RolloutGroup.from_dict(rec), cfg).to_dict()
            except (ValueError, KeyError, TypeError, SchemaError) as exc:
                result = {"group_id": rec.get("group_id"), "error": str(exc), "line": lineno}
            fh.write(dumps(result) + "\n")


@main.command()
@click.option("--cases", type=int, default=DEFAULT_CASES, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def simulate(ctx, cases, seed, out):
    """Run the seeded reward property suite; exits non-zero on any failure."""
    report = run_reward_suite(cases, _resolve(ctx, "seed", seed, 0))
    with _output(_resolve(ctx, "out", out)) as fh:
        fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if not report.passed:
        ctx.exit(1)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=DEFAULT_K, show_default=True, help="Images per inter sample (pool files).")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def stats(ctx, path, k, out):
    """Summarize a pool or sample file."""
    records = list(read_jsonl(path))
    kinds = {r.get("schema") for r in records}
    if kinds == {POOL_SCHEMA}:
        summary = _pool_stats(GroundingPool.from_records(records), k)
    elif kinds == {SAMPLE_SCHEMA}:
        summary = _sample_stats([MultiImageSample.from_dict(r) for r in records])
    elif not records:
        summary = {"records": 0}
    else:
        raise click.ClickException(f"unrecognized or mixed schemas: {sorted(map(str, kinds))}")
    with _output(_resolve(ctx, "out", out)) as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _pool_stats(pool: GroundingPool, k: int) -> dict:
    n_ann = [len(g.annotations) for g in pool]
    out = {
        "kind": "pool",
        "instances": len(pool),
        "annotations": sum(n_ann),
        "distinct_labels": len(pool.labels),
        "distinct_images": len({g.image for g in pool}),
        "datasets": dict(sorted(Counter(g.dataset for g in pool).items())),
        "annotations_per_instance_mean": statistics.fmean(n_ann) if n_ann else 0.0,
    }
    try:
        out["mix_plan"] = plan_mix(len(pool), k).to_dict()
    except MixError as exc:
        out["mix_plan"] = {"error": str(exc)}
    return out


def _sample_stats(samples: list[MultiImageSample]) -> dict:
    n_targets = [len(s.targets) for s in samples]
    return {
        "kind": "samples",
        "samples": len(samples),
        "branches": dict(sorted(Counter(s.branch for s in samples).items())),
        "targets": sum(n_targets),
        "targets_per_sample_mean": statistics.fmean(n_targets) if n_targets else 0.0,
        "images_per_sample": dict(sorted(Counter(str(s.num_images) for s in samples).items())),
        "templates_used": len({s.template_id for s in samples}),
    }


if __name__ == "__main__":  # pragma: no cover
    main()
