"""Command-line interface over the run-directory pipeline.

Exit codes: 0 success, 2 validation/user error (bad input, stage order),
1 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .data import DataError
from .dman import DmanError
from .elicitation import PreferenceError
from .models import ModelError
from .pipeline import (
    DEFAULT_KS,
    ValidationError,
    attribution_ranges,
    create_target,
    stage_ablate,
    stage_audit,
    stage_dman,
    stage_eval,
    stage_ingest,
    stage_sample,
    stage_search,
    stage_synth,
    stage_train_ref,
)
from .runs import RunError, RunManifest, StageOrderError
from .saem import SaemError

USER_ERRORS = (ValidationError, StageOrderError, RunError, DataError,
               PreferenceError, DmanError, ModelError, SaemError, ValueError)


def _load(run_dir: str) -> RunManifest:
    return RunManifest.load(run_dir)


def _guard(fn, *args, **kwargs):
    """Run a stage, mapping known errors to exit 2 and the rest to exit 1."""
    try:
        return fn(*args, **kwargs)
    except USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(1)


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        click.echo(f"error: expected comma-separated numbers, got {text!r}",
                   err=True)
        sys.exit(2)


@click.group()
def main() -> None:
    """Explanation-agreement pipeline: sample, fit, search, evaluate."""


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--n", default=5000, show_default=True)
@click.option("--p", default=20, show_default=True)
@click.option("--noise-std", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(run_dir: str, n: int, p: int, noise_std: float, seed: int) -> None:
    """Create a run directory with a synthetic dataset."""
    m = _guard(stage_synth, run_dir, n=n, p=p, noise_std=noise_std, seed=seed)
    click.echo(f"run {m.run_id}: synthetic dataset n={n} p={p} at {run_dir}")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--label", "label_column", required=True)
@click.option("--subgroup", "subgroup_column", default=None)
def ingest(run_dir: str, csv_path: str, label_column: str,
           subgroup_column: str | None) -> None:
    """Create a run directory from an external CSV."""
    m = _guard(stage_ingest, run_dir, csv_path, label_column, subgroup_column)
    click.echo(f"run {m.run_id}: ingested {csv_path} "
               f"(n={m.dataset['n']}, p={m.dataset['p']})")


@main.command("train-ref")
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--kind", default="logistic", show_default=True,
              type=click.Choice(["logistic", "mlp"]))
@click.option("--lr", default=None, type=float)
@click.option("--epochs", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
def train_ref(run_dir: str, kind: str, lr: float | None, epochs: int | None,
              seed: int) -> None:
    """Train the reference predictor."""
    m = _guard(_load, run_dir)
    _guard(stage_train_ref, m, kind, lr=lr, epochs=epochs, seed=seed)
    click.echo(f"run {m.run_id}: {kind} reference model trained")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--epsilon", default=0.05, show_default=True)
@click.option("--n-samples", default=500, show_default=True)
@click.option("--strategy", default="boundary_line_search", show_default=True,
              type=click.Choice(["boundary_line_search", "rejection"]))
@click.option("--seed", default=0, show_default=True)
def sample(run_dir: str, epsilon: float, n_samples: int, strategy: str,
           seed: int) -> None:
    """Sample masks from the epsilon-Rashomon set."""
    m = _guard(_load, run_dir)
    _guard(stage_sample, m, epsilon=epsilon, n_samples=n_samples,
           strategy=strategy, seed=seed)
    cfg = m.config["rashomon"]
    click.echo(f"run {m.run_id}: {n_samples} masks, bound {cfg['bound']:.6f}"
               + (" (truncated)" if cfg["truncated"] else ""))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--epochs", default=2000, show_default=True)
@click.option("--repeats", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
def dman(run_dir: str, lr: float, epochs: int, repeats: int, seed: int) -> None:
    """Build the attribution dataset and fit the surrogate network."""
    m = _guard(_load, run_dir)
    report = _guard(stage_dman, m, lr=lr, epochs=epochs, n_repeats=repeats,
                    seed=seed)
    click.echo(f"run {m.run_id}: surrogate held-out R^2 "
               f"{report['valid_r2']:.4f}")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--id", "target_id", required=True)
@click.option("--text", default=None, help="Preference DSL text.")
@click.option("--file", "file_path", default=None,
              type=click.Path(exists=True), help="File with DSL text.")
@click.option("--llm", is_flag=True, help="Route text through the NL backend.")
@click.option("--stakeholder", default="default", show_default=True)
def target(run_dir: str, target_id: str, text: str | None,
           file_path: str | None, llm: bool, stakeholder: str) -> None:
    """Compile a stakeholder target from preference text."""
    if (text is None) == (file_path is None):
        click.echo("error: exactly one of --text or --file is required",
                   err=True)
        sys.exit(2)
    if file_path is not None:
        text = Path(file_path).read_text()
    m = _guard(_load, run_dir)
    tgt = _guard(create_target, m, target_id, text=text, use_llm=llm,
                 stakeholder_id=stakeholder)
    click.echo(f"target {target_id}: ranking "
               f"{tgt.target_ranking.ranks.tolist()}")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--target", "target_id", required=True)
@click.option("--heads", default=50, show_default=True)
@click.option("--epochs", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
def search(run_dir: str, target_id: str, heads: int, epochs: int,
           seed: int) -> None:
    """Optimize masks toward the target ranking inside the Rashomon set."""
    m = _guard(_load, run_dir)
    res = _guard(stage_search, m, target_id, heads=heads, epochs=epochs,
                 seed=seed)
    click.echo(f"target {target_id}: spearman vs target "
               f"{res['spearman_vs_target']:.4f} "
               f"(reference {res['reference_spearman']:.4f}), "
               f"in-bound={res['loss_in_bound']}")


@main.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--target", "target_id", default=None)
@click.option("--k", "ks", default=",".join(str(k) for k in DEFAULT_KS),
              show_default=True, help="Comma-separated top-k fractions.")
@click.option("--seed", default=0, show_default=True)
def eval_cmd(run_dir: str, target_id: str | None, ks: str, seed: int) -> None:
    """Score all explainers (and the searched mask) against ground truth."""
    m = _guard(_load, run_dir)
    _guard(stage_eval, m, target_id, ks=_parse_floats(ks), seed=seed)
    click.echo((m.run_dir / "reports" / "eval.txt").read_text(), nl=False)


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--k", "ks", default="0.25", show_default=True)
@click.option("--seed", default=0, show_default=True)
def audit(run_dir: str, ks: str, seed: int) -> None:
    """Disagreement audit across explainers on the reference model."""
    m = _guard(_load, run_dir)
    out = _guard(stage_audit, m, ks=_parse_floats(ks), seed=seed)
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--target", "target_id", required=True)
@click.option("--epsilons", default="0.05,0.1,0.2", show_default=True)
@click.option("--seed", default=0, show_default=True)
def ablate(run_dir: str, target_id: str, epsilons: str, seed: int) -> None:
    """Repeat sampling + search per epsilon and summarize agreement."""
    m = _guard(_load, run_dir)
    out = _guard(stage_ablate, m, target_id,
                 epsilons=_parse_floats(epsilons), seed=seed)
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
def report(run_dir: str) -> None:
    """Print stage status, stored reports, and attribution ranges."""
    m = _guard(_load, run_dir)
    click.echo(f"run {m.run_id} at {m.run_dir}")
    for stage_name, done in m.stages.items():
        click.echo(f"  {stage_name:10s} {'done' if done else '-'}")
    for tid in m.list_targets():
        click.echo(f"  target {tid}")
    eval_txt = m.run_dir / "reports" / "eval.txt"
    if eval_txt.exists():
        click.echo(eval_txt.read_text(), nl=False)
    if m.stages.get("dman"):
        click.echo("attribution ranges across the sampled set:")
        for row in _guard(attribution_ranges, m):
            click.echo(f"  {row['feature']:16s} "
                       f"[{row['min']:+.4f}, {row['max']:+.4f}]")


@main.command()
@click.option("--root", "runs_root", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True),
              default=None, help="Directory with a built web UI to serve at /app.")
def serve(runs_root: str, port: int, host: str, static_dir: str | None) -> None:
    """Start the HTTP service over a directory of runs."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(runs_root, static_dir=static_dir),
                host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
