from io import StringIO

import numpy as np
import pandas as pd
import pytest
import yaml
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.ctr.metrics import assign_buckets
from apps.ctr.variants import resolve_variant
from apps.dataset.samples import make_samples
from apps.encoder.sasrec import encode
from apps.pipeline.ablation import RUN_COLUMNS, TABLE_COLUMNS
from apps.pipeline.config import validate_run_config
from apps.pipeline.stages import SAMPLE_SEED_OFFSETS, build_inputs, load_prepared, prefix_contexts
from apps.pipeline.workspace import STAGE_DIRS, Workspace
from apps.retrieval.neighbors import read_neighbors, write_neighbors
from apps.retrieval.pool import retrieve_topk
from main.utils.artifacts import read_manifest, read_resolved_config
from tests.conftest import TINY_CONFIG

PIPELINE = ["generate", "split", "pretrain", "build_pool", "retrieve", "train"]


def run(command, root, **options):
    out = StringIO()
    call_command(command, config=str(TINY_CONFIG), out=str(root), stdout=out, **options)
    return out.getvalue()


def run_pipeline(root):
    for command in PIPELINE:
        run(command, root)
    return root


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("tiny_run"))


@pytest.fixture(scope="session")
def ablation_config(tmp_path_factory):
    raw = yaml.safe_load(TINY_CONFIG.read_text())
    raw["ablation"] = {"seeds": [0]}
    path = tmp_path_factory.mktemp("configs") / "ablation.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_every_stage_leaves_a_manifest(run_dir):
    for stage in PIPELINE:
        directory = run_dir / STAGE_DIRS[stage]
        assert read_manifest(directory)["stage"] == stage
        resolved = read_resolved_config(directory)
        assert resolved["model"]["K"] == 2
        assert resolved["output_dir"] == str(run_dir)


def test_split_manifest(run_dir):
    manifest = read_manifest(run_dir / "split")
    assert (manifest["train_users"], manifest["val_users"], manifest["test_users"]) == ("96", "12", "12")
    frame = pd.read_csv(run_dir / "split" / "interactions.csv")
    assert frame.groupby("user_id")["split"].nunique().max() == 1


def test_neighbor_file(run_dir):
    path = run_dir / "neighbors" / "neighbors.tsv"
    neighbors = read_neighbors(path)
    frame = pd.read_csv(run_dir / "split" / "interactions.csv")
    train_users = set(frame.loc[frame["split"] == "train", "user_id"])
    assert set(neighbors) == set(frame["user_id"])
    for user_id, found in neighbors.items():
        assert user_id not in found.user_ids
        assert set(found.user_ids) <= train_users
        assert len(found) == 6
        assert list(found.scores) == sorted(found.scores, reverse=True)
    copy = write_neighbors(run_dir.parent / "neighbors_copy.tsv", neighbors)
    assert copy.read_bytes() == path.read_bytes()


def test_training_outputs(run_dir):
    manifest = read_manifest(run_dir / "model")
    assert manifest["variant"] == "full"
    assert manifest["pooling"] == "suin"
    log = pd.read_csv(run_dir / "model" / "training_log.csv")
    assert list(log.columns) == ["epoch", "train_loss", "val_auc", "val_logloss", "wall_time"]
    assert 1 <= len(log) <= 3
    assert int(manifest["best_epoch"]) == int(log.loc[log["val_auc"].idxmax(), "epoch"])


def test_evaluate_by_sequence_length(run_dir):
    output = run("evaluate", run_dir, grouping="seq_length")
    assert "grouping=seq_length" in output
    report = pd.read_csv(run_dir / "eval" / "report_seq_length.csv")
    assert report.iloc[0]["group"] == "all"

    frame = pd.read_csv(run_dir / "split" / "interactions.csv")
    test_lengths = frame[frame["split"] == "test"].groupby("user_id").size().to_numpy() - 1
    occupied = np.unique(assign_buckets(test_lengths, (1, 3, 6, 11, 21, 51)))
    assert len(report) == 1 + len(occupied)
    assert report["count"].iloc[1:].sum() == report["count"].iloc[0]
    assert 0.0 <= report["auc"].iloc[0] <= 1.0


def test_evaluate_validation_split(run_dir):
    run("evaluate", run_dir, split="val")
    assert read_manifest(run_dir / "eval")["split"] == "val"


def test_inspect(run_dir):
    frame = pd.read_csv(run_dir / "split" / "interactions.csv")
    user_id = int(frame.loc[frame["split"] == "test", "user_id"].iloc[0])
    output = run("inspect", run_dir, user=user_id)
    assert f"augmented sequence: target user {user_id}, K=2, L=6, scheme=UTPE" in output
    assert (run_dir / "inspect" / f"augmented_{user_id}.txt").exists()
    weights = pd.read_csv(run_dir / "inspect" / f"attention_{user_id}.csv")
    assert len(weights) == 3 * 6
    assert weights["weight"].sum() == pytest.approx(1.0, abs=1e-6)
    assert (weights.loc[weights["masked"] == 1, "weight"] == 0).all()


def test_inspect_unknown_user(run_dir):
    with pytest.raises(CommandError, match="not in the dataset"):
        run("inspect", run_dir, user=10_000)


def test_missing_upstream_names_the_command(tmp_path):
    with pytest.raises(CommandError, match="manage.py split"):
        run("pretrain", tmp_path)


def test_invalid_override(tmp_path):
    with pytest.raises(CommandError, match="model.K"):
        run("generate", tmp_path, K=-1)


def test_runs_are_reproducible(run_dir, tmp_path):
    again = run_pipeline(tmp_path / "again")
    for relative in ("data/interactions.csv", "split/interactions.csv", "neighbors/neighbors.tsv", "model/model.ctrt"):
        assert (again / relative).read_bytes() == (run_dir / relative).read_bytes(), relative


def test_ingested_interactions(tmp_path):
    source = tmp_path / "source.csv"
    pd.DataFrame(
        {"user_id": [0, 0, 1, 1, 2], "item_id": [1, 2, 3, 1, 2], "timestamp": [1, 2, 1, 2, 7]}
    ).to_csv(source, index=False)
    output = run("generate", tmp_path / "run", interactions=str(source))
    assert "n_interactions=5" in output
    assert read_manifest(tmp_path / "run" / "data")["source"] == str(source)


def test_topk_sweep(run_dir, ablation_config):
    output = StringIO()
    call_command("ablate", config=str(ablation_config), out=str(run_dir), sweep="topk", stdout=output)
    table = pd.read_csv(run_dir / "ablation" / "topk.csv")
    assert list(table.columns) == TABLE_COLUMNS
    assert table["setting"].tolist() == [f"K={k}" for k in range(7)]
    assert (table["status"] == "ok").all()
    assert table["delta_auc"].iloc[0] == 0.0
    assert read_manifest(run_dir / "ablation")["seeds"] == "0"
    runs = pd.read_csv(run_dir / "ablation" / "topk_seeds.csv")
    assert list(runs.columns) == RUN_COLUMNS
    assert runs["setting"].tolist() == table["setting"].tolist()
    assert (runs["seed"] == 0).all()
    np.testing.assert_allclose(runs["auc"], table["auc_mean"], atol=1e-6)


def test_variant_sweep(run_dir, ablation_config):
    call_command(
        "ablate", config=str(ablation_config), out=str(run_dir), sweep="variants", stdout=StringIO()
    )
    table = pd.read_csv(run_dir / "ablation" / "variants.csv")
    assert table["setting"].tolist() == [
        "full", "no_uta", "no_uta_keep_be", "random_users", "no_su_no_uta", "no_pos"
    ]
    assert (table["status"] == "ok").all()


def test_ablation_reruns_are_byte_identical(run_dir, ablation_config):
    def sweep():
        call_command(
            "ablate",
            config=str(ablation_config),
            out=str(run_dir),
            sweep="position_schemes",
            stdout=StringIO(),
        )
        return [
            (run_dir / "ablation" / name).read_bytes()
            for name in ("position_schemes.csv", "position_schemes_seeds.csv")
        ]

    assert sweep() == sweep()


def test_all_positions_embeds_each_sample_prefix(run_dir):
    raw = yaml.safe_load(TINY_CONFIG.read_text())
    raw["data"]["sample_mode"] = "all_positions"
    raw["output_dir"] = str(run_dir)
    config = validate_run_config(raw)
    prepared = load_prepared(Workspace(run_dir))
    samples = make_samples(
        prepared.split_frame("train"),
        mode="all_positions",
        negatives_per_positive=config.data.negatives_per_positive,
        seed=config.data.seed + SAMPLE_SEED_OFFSETS["train"],
        n_items=prepared.n_items,
    ).samples
    inputs = build_inputs(prepared, config, "train")
    assert len(inputs) == len(samples)

    differs_from_stored = 0
    for row, sample in enumerate(samples):
        embedded = encode(sample.history, prepared.encoder).vector
        np.testing.assert_allclose(inputs.slot_embeddings[row, 0], embedded, rtol=0, atol=1e-10)
        if sample.label == 1:
            assert sample.item_id not in sample.history.items
        differs_from_stored += not np.allclose(embedded, prepared.embeddings[sample.user_id])
    assert differs_from_stored > 0

    plan = resolve_variant(config.model)
    first = samples[0]
    contexts = prefix_contexts(samples[:2], prepared, config, plan, {})
    expected = retrieve_topk(
        prepared.pool,
        first.user_id,
        encode(first.history, prepared.encoder),
        plan.top_k,
        config.retrieval.measure,
        query_items=frozenset(first.history.items),
    )
    assert contexts[0].neighbors.user_ids == expected.user_ids
    assert first.user_id not in contexts[0].neighbors.user_ids
