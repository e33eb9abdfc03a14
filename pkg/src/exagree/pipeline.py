"""Stage drivers tying the library together over a run directory.

Every stage reloads its inputs from disk, so a rerun from a saved manifest
reproduces artifacts byte-identically given the recorded seeds.
"""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import models as models_mod
from .attribution import (
    AttributionVector,
    Ranking,
    build_attribution_dataset,
    ground_truth_lr,
    permutation_fis,
    rank_of,
)
from .dman import load_dman, save_dman, train_dman
from .elicitation import StubLlmClient, compile_target, llm_elicit, parse_preferences
from .metrics import METRIC_FIELDS, best_count, format_report_table, full_report
from .rashomon import RashomonConfig, load_sample, sample_masks, save_sample
from .runs import RunManifest, atomic_write_text
from .saem import MhmnConfig, SaemResult, StakeholderTarget, audit_disagreement, optimize_saem

__all__ = [
    "ValidationError",
    "stage_synth",
    "stage_ingest",
    "stage_train_ref",
    "stage_sample",
    "stage_dman",
    "create_target",
    "load_target",
    "stage_search",
    "stage_eval",
    "stage_audit",
    "stage_ablate",
    "load_run_dataset",
    "load_reference",
    "attribution_ranges",
    "target_pseudo_attribution",
    "DEFAULT_KS",
    "EVAL_EXPLAINERS",
]

DEFAULT_KS = (0.1, 0.25, 0.5, 0.75, 1.0)
EVAL_EXPLAINERS = ("random", "vanilla_grad", "grad_x_input",
                   "integrated_gradients", "smoothgrad", "fis")
DEFAULT_VALID_FRACTION = 0.2


class ValidationError(ValueError):
    """User-facing input/stage errors (CLI exit code 2, HTTP 4xx)."""


def _default_weights(p: int) -> list[float]:
    return [2.0 * 0.85 ** j for j in range(p)]


def stage_synth(run_dir: str | Path, n: int = 5000, p: int = 20,
                weights: list[float] | None = None, noise_std: float = 0.0,
                seed: int = 0, valid_fraction: float = DEFAULT_VALID_FRACTION,
                split_seed: int = 1) -> RunManifest:
    """Create a run directory seeded with a synthetic dataset."""
    weights = list(weights) if weights is not None else _default_weights(p)
    try:
        ds = data_mod.generate_synthetic(n, p, np.array(weights), noise_std, seed)
    except data_mod.DataError as exc:
        raise ValidationError(str(exc)) from exc
    manifest = RunManifest.create(run_dir)
    data_mod.save_csv(ds, manifest.run_dir / "dataset.csv", manifest={
        "weights": weights, "seed": seed, "noise_std": noise_std, "n": n, "p": p,
    })
    manifest.seeds["data"] = seed
    manifest.seeds["split"] = split_seed
    manifest.config["split"] = {"valid_fraction": valid_fraction, "seed": split_seed}
    manifest.config["label_column"] = "label"
    manifest.dataset = {"name": ds.name, "n": n, "p": p, "kind": "synthetic",
                        "feature_names": ds.feature_names}
    manifest.record_artifact("dataset.csv")
    manifest.mark_stage("data")
    return manifest


def stage_ingest(run_dir: str | Path, csv_path: str | Path, label_column: str,
                 subgroup_column: str | None = None,
                 valid_fraction: float = DEFAULT_VALID_FRACTION,
                 split_seed: int = 1) -> RunManifest:
    """Create a run directory from an external CSV."""
    try:
        ds = data_mod.load_csv(csv_path, label_column, subgroup_column)
    except data_mod.DataError as exc:
        raise ValidationError(str(exc)) from exc
    manifest = RunManifest.create(run_dir)
    data_mod.save_csv(ds, manifest.run_dir / "dataset.csv")
    manifest.seeds["split"] = split_seed
    manifest.config["split"] = {"valid_fraction": valid_fraction, "seed": split_seed}
    manifest.config["label_column"] = "label"
    if subgroup_column is not None:
        manifest.config["subgroup_column"] = subgroup_column
    manifest.dataset = {"name": ds.name, "n": ds.n, "p": ds.p, "kind": "csv",
                        "feature_names": ds.feature_names,
                        "source": str(csv_path)}
    manifest.record_artifact("dataset.csv")
    manifest.mark_stage("data")
    return manifest


def load_run_dataset(manifest: RunManifest):
    """Dataset + deterministic split reconstructed from the run directory."""
    manifest.require_stage("data")
    subgroup = manifest.config.get("subgroup_column")
    ds = data_mod.load_csv(manifest.run_dir / "dataset.csv",
                           manifest.config.get("label_column", "label"),
                           subgroup)
    cfg = manifest.config["split"]
    sp = data_mod.split(ds, cfg["valid_fraction"], cfg["seed"])
    return ds, sp


def stage_train_ref(manifest: RunManifest, kind: str = "logistic",
                    lr: float | None = None, epochs: int | None = None,
                    seed: int = 0, hidden: list[int] | None = None) -> None:
    manifest.require_stage("data")
    ds, sp = load_run_dataset(manifest)
    if kind == "logistic":
        model = models_mod.train_logistic(ds, sp, lr=lr or 0.5,
                                          epochs=epochs or 500, seed=seed)
    elif kind == "mlp":
        sizes = [ds.p, *(hidden or [16]), 1]
        model = models_mod.train_mlp(ds, sp, layer_sizes=sizes, lr=lr or 0.1,
                                     epochs=epochs or 1000, seed=seed)
    else:
        raise ValidationError(f"unknown reference model kind {kind!r}")
    models_mod.save_model(model, manifest.run_dir / "models", "reference")
    manifest.seeds["reference"] = seed
    manifest.config["reference"] = {"kind": kind, "lr": lr, "epochs": epochs,
                                    "hidden": hidden}
    manifest.record_artifact("models/reference.json")
    manifest.record_artifact("models/reference.bin")
    manifest.mark_stage("reference")


def load_reference(manifest: RunManifest):
    manifest.require_stage("reference")
    return models_mod.load_model(manifest.run_dir / "models", "reference")


def stage_sample(manifest: RunManifest, epsilon: float = 0.05,
                 n_samples: int = 500, strategy: str = "boundary_line_search",
                 seed: int = 0, mask_max: float = 2.0) -> None:
    manifest.require_stage("reference")
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    cfg = RashomonConfig(epsilon=epsilon, n_samples=n_samples, seed=seed,
                         exploration=strategy, mask_max=mask_max)
    sample = sample_masks(base, ds, sp, cfg)
    save_sample(sample, manifest.run_dir / "rashomon", ds.feature_names)
    manifest.seeds["rashomon"] = seed
    manifest.config["rashomon"] = {
        "epsilon": epsilon, "n_samples": n_samples, "strategy": strategy,
        "mask_max": mask_max, "bound": sample.bound,
        "reference_loss": sample.reference_loss, "truncated": sample.truncated,
    }
    for name in ("masks.csv", "losses.csv", "manifest.json"):
        manifest.record_artifact(f"rashomon/{name}")
    manifest.mark_stage("rashomon")


def stage_dman(manifest: RunManifest, lr: float = 1e-4, epochs: int = 2000,
               n_repeats: int = 5, seed: int = 0,
               valid_fraction: float = 0.1) -> dict:
    manifest.require_stage("rashomon")
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    sample = load_sample(manifest.run_dir / "rashomon")
    datt = build_attribution_dataset(sample, base, ds, sp,
                                     n_repeats=n_repeats, seed=seed)
    with open(manifest.run_dir / "rashomon" / "attributions.csv", "w",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names)
        for row in datt.attributions:
            writer.writerow([repr(float(v)) for v in row])
    model = train_dman(datt, lr=lr, epochs=epochs, seed=seed)
    save_dman(model, manifest.run_dir / "dman")
    manifest.seeds["dman"] = seed
    manifest.config["dman"] = {"lr": lr, "epochs": epochs,
                               "n_repeats": n_repeats,
                               "training_report": model.training_report}
    manifest.record_artifact("rashomon/attributions.csv")
    manifest.record_artifact("dman/dman.json")
    manifest.record_artifact("dman/dman.bin")
    manifest.mark_stage("dman")
    return model.training_report


def _reference_ranking(manifest: RunManifest, ds, sp, base) -> Ranking:
    seed = manifest.seeds.get("dman", 0)
    return rank_of(permutation_fis(base, ds, sp, seed=seed))


def create_target(manifest: RunManifest, target_id: str,
                  text: str | None = None,
                  ranking: list[int] | None = None,
                  signs: list[int] | None = None,
                  use_llm: bool = False,
                  stakeholder_id: str = "default") -> StakeholderTarget:
    """Compile and persist a stakeholder target from DSL text or a raw ranking."""
    manifest.require_stage("dman")
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    ref_ranking = _reference_ranking(manifest, ds, sp, base)
    if text is not None:
        try:
            if use_llm:
                program = llm_elicit(text, ds.feature_names, StubLlmClient())
                source = "llm"
            else:
                program = parse_preferences(text, ds.feature_names)
                source = "dsl"
            target = compile_target(program, ref_ranking, ds.feature_names,
                                    stakeholder_id=stakeholder_id, source=source)
        except Exception as exc:
            raise ValidationError(str(exc)) from exc
    elif ranking is not None:
        if sorted(ranking) != list(range(1, ds.p + 1)):
            raise ValidationError(
                f"ranking must be a permutation of 1..{ds.p}")
        sign_arr = None
        if signs is not None:
            if len(signs) != ds.p or not all(s in (-1, 0, 1) for s in signs):
                raise ValidationError("signs must be a length-p list of -1/0/+1")
            sign_arr = np.array(signs, dtype=float)
        target = StakeholderTarget(
            target_ranking=Ranking(ranks=np.array(ranking)),
            target_signs=sign_arr, source="raw", stakeholder_id=stakeholder_id)
    else:
        raise ValidationError("either preference text or a ranking is required")

    tdir = manifest.run_dir / "targets" / target_id
    tdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "target_id": target_id,
        "stakeholder_id": stakeholder_id,
        "source": target.source,
        "text": text,
        "ranking": target.target_ranking.ranks.tolist(),
        "signs": (target.target_signs.astype(int).tolist()
                  if target.target_signs is not None else None),
        "reference_ranking": ref_ranking.ranks.tolist(),
    }
    atomic_write_text(tdir / "target.json",
                      json.dumps(payload, indent=2, sort_keys=True))
    manifest.mark_stage("targets")
    return target


def load_target(manifest: RunManifest, target_id: str) -> tuple[StakeholderTarget, dict]:
    path = manifest.run_dir / "targets" / target_id / "target.json"
    if not path.exists():
        raise ValidationError(f"unknown target {target_id!r}")
    payload = json.loads(path.read_text())
    signs = payload.get("signs")
    target = StakeholderTarget(
        target_ranking=Ranking(ranks=np.array(payload["ranking"])),
        target_signs=np.array(signs, dtype=float) if signs else None,
        source=payload.get("source", "raw"),
        stakeholder_id=payload.get("stakeholder_id", "default"),
    )
    return target, payload


def target_pseudo_attribution(target: StakeholderTarget) -> AttributionVector:
    """Attribution stand-in for a target: magnitude p+1-rank, requested signs."""
    ranks = target.target_ranking.ranks
    p = len(ranks)
    mags = (p + 1 - ranks).astype(float)
    signs = np.ones(p)
    if target.target_signs is not None:
        spec = target.target_signs != 0
        signs[spec] = target.target_signs[spec]
    return AttributionVector(values=signs * mags, method="target",
                             model_id=target.stakeholder_id)


def stage_search(manifest: RunManifest, target_id: str,
                 heads: int = 50, epochs: int = 100, seed: int = 0,
                 lr: float = 0.01, beta: float = 10.0,
                 lambda_sparsity: float = 0.1, lambda_diversity: float = 0.1,
                 ks: tuple[float, ...] = DEFAULT_KS,
                 fis_repeats: int = 5) -> dict:
    """Run the mask search for one target and persist result + trace."""
    manifest.require_stage("dman")
    target, _ = load_target(manifest, target_id)
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    sample = load_sample(manifest.run_dir / "rashomon")
    dman = load_dman(manifest.run_dir / "dman")
    cfg = MhmnConfig(heads=heads, epochs=epochs, seed=seed, lr=lr, beta=beta,
                     lambda_sparsity=lambda_sparsity,
                     lambda_diversity=lambda_diversity, fis_repeats=fis_repeats)
    result = optimize_saem(base, ds, sp, sample, dman, target, cfg)

    ref_attr = permutation_fis(base, ds, sp, n_repeats=fis_repeats, seed=seed)
    pseudo_gt = target_pseudo_attribution(target)
    from .models import Mask, MaskedModel
    saem_model = MaskedModel(base=base, mask=result.best_mask)
    agreement: dict = {}
    for k in ks:
        ref_rep = full_report(base, ds, sp, ref_attr, pseudo_gt, k, seed=seed)
        saem_rep = full_report(saem_model, ds, sp, result.true_attributions,
                               pseudo_gt, k, seed=seed)
        agreement[str(k)] = {
            "reference": {m: getattr(ref_rep, m) for m in METRIC_FIELDS},
            "saem": {m: getattr(saem_rep, m) for m in METRIC_FIELDS},
        }

    tdir = manifest.run_dir / "targets" / target_id
    payload = {
        "target_id": target_id,
        "mask": result.best_mask.values.tolist(),
        "achieved_ranking": result.achieved_ranking.ranks.tolist(),
        "true_attributions": result.true_attributions.values.tolist(),
        "spearman_vs_target": result.spearman_vs_target,
        "reference_spearman": result.reference_spearman,
        "validation_loss": result.validation_loss,
        "loss_in_bound": result.loss_in_bound,
        "agreement": agreement,
        "config": {"heads": heads, "epochs": epochs, "seed": seed, "lr": lr,
                   "beta": beta, "lambda_sparsity": lambda_sparsity,
                   "lambda_diversity": lambda_diversity},
    }
    atomic_write_text(tdir / "result.json",
                      json.dumps(payload, indent=2, sort_keys=True))
    with open(tdir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "head", "rank_loss", "sign_loss", "active"])
        for row in result.per_head_trace:
            writer.writerow([row["epoch"], row["head"],
                             "" if row["rank_loss"] is None else row["rank_loss"],
                             "" if row["sign_loss"] is None else row["sign_loss"],
                             int(row["active"])])
    manifest.seeds[f"search:{target_id}"] = seed
    manifest.mark_stage("saem")
    return payload


def _ground_truth(manifest: RunManifest, base) -> AttributionVector:
    from .models import LinearModel
    if not isinstance(base, LinearModel):
        raise ValidationError(
            "ground-truth evaluation requires a logistic reference model")
    return ground_truth_lr(base)


def stage_eval(manifest: RunManifest, target_id: str | None = None,
               ks: tuple[float, ...] = DEFAULT_KS, seed: int = 0) -> dict:
    """Benchmark-style report of all explainers (and the SAEM) vs LR ground truth."""
    manifest.require_stage("dman")
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    gt = _ground_truth(manifest, base)
    from .attribution import explain_baseline
    from .models import Mask, MaskedModel

    attributions = []
    for kind in EVAL_EXPLAINERS:
        if kind == "fis":
            a = permutation_fis(base, ds, sp, seed=seed)
            a.method = "fis"
        else:
            a = explain_baseline(kind, base, ds, sp, seed=seed)
        attributions.append((a, base))
    if target_id is not None:
        rpath = manifest.run_dir / "targets" / target_id / "result.json"
        if not rpath.exists():
            raise ValidationError(f"no search result for target {target_id!r}")
        result = json.loads(rpath.read_text())
        saem_model = MaskedModel(base=base,
                                 mask=Mask(values=np.array(result["mask"])))
        a = AttributionVector(values=np.array(result["true_attributions"]),
                              method="fis_saem", model_id="saem")
        attributions.append((a, saem_model))

    out: dict = {"ks": list(ks), "rows": {}}
    tables = []
    for k in ks:
        rows = [full_report(model, ds, sp, a, gt, k, seed=seed)
                for a, model in attributions]
        counts = best_count(rows)
        out["rows"][str(k)] = [
            {**{m: getattr(r, m) for m in METRIC_FIELDS},
             "method": r.method, "best": c}
            for r, c in zip(rows, counts)
        ]
        tables.append(f"k = {k}\n" + format_report_table(rows, counts))
    reports = manifest.run_dir / "reports"
    reports.mkdir(exist_ok=True)
    atomic_write_text(reports / "eval.json",
                      json.dumps(out, indent=2, sort_keys=True))
    atomic_write_text(reports / "eval.txt", "\n\n".join(tables) + "\n")
    manifest.mark_stage("reports")
    return out


def stage_audit(manifest: RunManifest, ks: tuple[float, ...] = (0.25,),
                seed: int = 0) -> dict:
    """Disagreement audit of all explainers on the reference model."""
    manifest.require_stage("reference")
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    gt = _ground_truth(manifest, base)
    report = audit_disagreement({"reference": base}, list(EVAL_EXPLAINERS),
                                ds, sp, gt, list(ks), seed=seed)
    serializable: dict = {}
    for model_id, per_k in report.items():
        serializable[model_id] = {}
        for k, block in per_k.items():
            serializable[model_id][str(k)] = [
                {**{m: getattr(r, m) for m in METRIC_FIELDS},
                 "method": r.method, "best": c}
                for r, c in zip(block["reports"], block["best_counts"])
            ]
    reports = manifest.run_dir / "reports"
    reports.mkdir(exist_ok=True)
    atomic_write_text(reports / "audit.json",
                      json.dumps(serializable, indent=2, sort_keys=True))
    return serializable


def stage_ablate(manifest: RunManifest, target_id: str,
                 epsilons: tuple[float, ...] = (0.05, 0.1, 0.2),
                 ks: tuple[float, ...] = DEFAULT_KS,
                 n_samples: int = 200, heads: int = 20, epochs: int = 60,
                 seed: int = 0) -> dict:
    """Re-run sampling, surrogate, and search per epsilon; summarize agreement."""
    manifest.require_stage("targets")
    target, payload = load_target(manifest, target_id)
    summary: dict = {"epsilons": list(epsilons), "ks": list(ks), "agreement": {}}
    pseudo_gt = target_pseudo_attribution(target)
    ds, sp = load_run_dataset(manifest)
    base = load_reference(manifest)
    from .models import Mask, MaskedModel
    for eps in epsilons:
        sub_dir = manifest.run_dir / "ablate" / f"eps_{eps}"
        sub = RunManifest.create(sub_dir, run_id=f"{manifest.run_id}-eps{eps}")
        shutil.copy2(manifest.run_dir / "dataset.csv", sub_dir / "dataset.csv")
        sub.seeds = dict(manifest.seeds)
        sub.config = json.loads(json.dumps(manifest.config))
        sub.dataset = dict(manifest.dataset)
        sub.record_artifact("dataset.csv")
        sub.mark_stage("data")
        models_dir = manifest.run_dir / "models"
        shutil.copytree(models_dir, sub_dir / "models", dirs_exist_ok=True)
        sub.record_artifact("models/reference.json")
        sub.record_artifact("models/reference.bin")
        sub.mark_stage("reference")
        stage_sample(sub, epsilon=eps, n_samples=n_samples,
                     seed=manifest.seeds.get("rashomon", seed))
        stage_dman(sub, seed=manifest.seeds.get("dman", seed),
                   epochs=manifest.config.get("dman", {}).get("epochs", 2000),
                   lr=manifest.config.get("dman", {}).get("lr", 1e-4))
        tdir = sub_dir / "targets" / target_id
        tdir.mkdir(parents=True, exist_ok=True)
        (tdir / "target.json").write_text(json.dumps(payload))
        sub.mark_stage("targets")
        result = stage_search(sub, target_id, heads=heads, epochs=epochs,
                              seed=seed, ks=ks)
        saem_model = MaskedModel(base=base,
                                 mask=Mask(values=np.array(result["mask"])))
        per_k = {}
        for k in ks:
            rep = full_report(saem_model, ds, sp,
                              AttributionVector(values=np.array(
                                  result["true_attributions"])),
                              pseudo_gt, k, seed=seed)
            per_k[str(k)] = {m: getattr(rep, m) for m in ("fa", "ra", "sa", "sra")}
        summary["agreement"][str(eps)] = per_k
    reports = manifest.run_dir / "reports"
    reports.mkdir(exist_ok=True)
    atomic_write_text(reports / "ablation.json",
                      json.dumps(summary, indent=2, sort_keys=True))
    manifest.mark_stage("saem")
    manifest.mark_stage("reports")
    return summary


def attribution_ranges(manifest: RunManifest) -> list[dict]:
    """Per-feature min/max attribution across the sampled Rashomon set."""
    manifest.require_stage("dman")
    path = manifest.run_dir / "rashomon" / "attributions.csv"
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    return [
        {"feature": name, "min": float(values[:, j].min()),
         "max": float(values[:, j].max())}
        for j, name in enumerate(names)
    ]
