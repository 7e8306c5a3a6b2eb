"""
Pipeline stages. Each `run_*` reads the artifacts of its upstream stages (checking
their manifests), writes its own outputs plus a manifest and a resolved config,
and returns the manifest entries.

Seeds: `data.seed` fixes everything about the dataset (corpus, split, negatives,
random-user draws); `seed` fixes everything learned (encoder, CTR model, shuffling).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from apps.augmentation.render import render_augmented
from apps.augmentation.sequences import BehaviorSequence
from apps.attention.dump import write_attention_weights
from apps.ctr.batching import ModelInputs, SampleContext, augment_sample, collate
from apps.ctr.metrics import EvalReport, evaluate
from apps.ctr.model import ModelParams, predict_batch
from apps.ctr.training import TrainingResult, train
from apps.ctr.variants import VariantPlan, resolve_neighbors, resolve_variant
from apps.dataset.interchange import n_items_of, read_interactions, write_interactions
from apps.dataset.samples import TrainingSample, build_histories, make_samples
from apps.dataset.splits import split_by_user, users_by_split
from apps.dataset.synthetic import generate_synthetic
from apps.encoder.sasrec import EncoderParams, embedding_table, embeddings_from_table, encode_many
from apps.encoder.training import pretrain_encoder
from apps.retrieval.neighbors import assert_no_leakage, read_neighbors, write_neighbors
from apps.retrieval.pool import (
    RetrievalPool,
    SimilarUserResult,
    build_pool,
    retrieve_all,
    retrieve_topk,
)
from main.utils.artifacts import (
    read_resolved_config,
    read_tensor_file,
    require_stage,
    write_manifest,
    write_resolved_config,
    write_tensor_file,
)
from main.utils.exceptions import ConfigurationError

from .config import RunConfig, validate_run_config
from .workspace import Workspace

logger = logging.getLogger(__name__)

INTERACTIONS_FILE = "interactions.csv"
SAMPLE_SEED_OFFSETS = {"train": 11, "val": 23, "test": 37}


def _finish(directory: Path, config: RunConfig, manifest: Dict) -> Dict:
    write_resolved_config(directory, config.resolved())
    write_manifest(directory, manifest)
    return manifest


# generate / split


def run_generate(
    config: RunConfig, workspace: Workspace, interactions_path: Optional[Path] = None
) -> Dict:
    source = interactions_path or config.data.interactions_path
    if source:
        frame = read_interactions(Path(source), command="generate --interactions PATH")
        n_items = n_items_of(frame)
        origin = str(source)
    else:
        corpus = generate_synthetic(config.data.synthetic(), threads=config.threads)
        frame = corpus.interactions
        n_items = config.data.n_items
        origin = "synthetic"
        write_tensor_file(
            workspace.data / "clusters.ctrt",
            {"user_clusters": corpus.user_clusters, "item_clusters": corpus.item_clusters},
        )
    write_interactions(workspace.data / INTERACTIONS_FILE, frame)
    return _finish(
        workspace.data,
        config,
        {
            "stage": "generate",
            "source": origin,
            "n_users": frame["user_id"].nunique(),
            "n_items": n_items,
            "n_interactions": len(frame),
            "seed": config.data.seed,
        },
    )


def run_split(config: RunConfig, workspace: Workspace) -> Dict:
    require_stage(workspace.data, "generate")
    frame = read_interactions(workspace.data / INTERACTIONS_FILE)
    tagged = split_by_user(frame, config.data.split_ratios, seed=config.data.seed)
    write_interactions(workspace.split / INTERACTIONS_FILE, tagged)
    sizes = {name: len(users) for name, users in users_by_split(tagged).items()}
    return _finish(
        workspace.split,
        config,
        {
            "stage": "split",
            "train_users": sizes["train"],
            "val_users": sizes["val"],
            "test_users": sizes["test"],
            "seed": config.data.seed,
        },
    )


def _split_frame(workspace: Workspace) -> Tuple[pd.DataFrame, int]:
    require_stage(workspace.split, "split")
    data = require_stage(workspace.data, "generate")
    return read_interactions(workspace.split / INTERACTIONS_FILE, command="split"), int(
        data["n_items"]
    )


# pretrain / build_pool / retrieve


def run_pretrain(config: RunConfig, workspace: Workspace, verbose: bool = False) -> Dict:
    frame, n_items = _split_frame(workspace)
    histories = build_histories(frame)
    corpus = [h for h in histories.values() if h.split == "train"]
    params, losses = pretrain_encoder(corpus, n_items, config.encoder, seed=config.seed, verbose=verbose)
    embeddings = encode_many([histories[u] for u in sorted(histories)], params)
    params.save(workspace.encoder / "encoder.ctrt")
    write_tensor_file(workspace.encoder / "embeddings.ctrt", embedding_table(embeddings))
    pd.DataFrame({"epoch": np.arange(1, len(losses) + 1), "loss": losses}).to_csv(
        workspace.encoder / "pretrain_log.csv", index=False, float_format="%.6f"
    )
    return _finish(
        workspace.encoder,
        config,
        {
            "stage": "pretrain",
            "d_prime": params.d_prime,
            "train_users": len(corpus),
            "encoded_users": len(embeddings),
            "empty_histories": sum(e.empty for e in embeddings),
            "final_loss": f"{losses[-1]:.6f}" if losses else "nan",
            "seed": config.seed,
        },
    )


def _load_embeddings(workspace: Workspace):
    require_stage(workspace.encoder, "pretrain")
    encoder = EncoderParams.load(workspace.encoder / "encoder.ctrt")
    embeddings = embeddings_from_table(read_tensor_file(workspace.encoder / "embeddings.ctrt"))
    return encoder, {e.user_id: e for e in embeddings}


def run_build_pool(config: RunConfig, workspace: Workspace) -> Dict:
    frame, _ = _split_frame(workspace)
    encoder, embeddings = _load_embeddings(workspace)
    train_histories = [h for h in build_histories(frame).values() if h.split == "train"]
    pool = build_pool(train_histories, encoder, embeddings=embeddings)
    pool.save(workspace.pool / "pool.ctrt")
    return _finish(
        workspace.pool,
        config,
        {"stage": "build_pool", "pool_size": pool.size, "d_prime": encoder.d_prime},
    )


def compute_neighbors(
    pool: RetrievalPool,
    histories: Dict[int, BehaviorSequence],
    embeddings: Dict,
    measure: str,
    depth: int,
    threads: int = 1,
) -> Dict[int, SimilarUserResult]:
    queries = [
        (user_id, embeddings.get(user_id), frozenset(history.items))
        for user_id, history in histories.items()
    ]
    results = retrieve_all(pool, queries, depth, measure, threshold=None, threads=threads)
    assert_no_leakage(results, pool.user_ids)
    return results


def neighbor_depth(config: RunConfig) -> int:
    depth = config.retrieval.stored_neighbors
    if config.model.K > depth:
        logger.warning(
            f"K={config.model.K} exceeds retrieval.stored_neighbors={depth}; storing {config.model.K}"
        )
    return max(depth, config.model.K)


def run_retrieve(config: RunConfig, workspace: Workspace) -> Dict:
    frame, _ = _split_frame(workspace)
    require_stage(workspace.pool, "build_pool")
    pool = RetrievalPool.load(workspace.pool / "pool.ctrt")
    _, embeddings = _load_embeddings(workspace)
    histories = build_histories(frame)
    depth = neighbor_depth(config)
    results = compute_neighbors(
        pool, histories, embeddings, config.retrieval.measure, depth, config.threads
    )
    write_neighbors(workspace.neighbors / "neighbors.tsv", results)
    return _finish(
        workspace.neighbors,
        config,
        {
            "stage": "retrieve",
            "measure": config.retrieval.measure,
            "stored_neighbors": depth,
            "queries": len(results),
            "without_neighbors": sum(1 for r in results.values() if r.warning),
        },
    )


# train / evaluate / inspect


@dataclass
class PreparedData:
    """Everything downstream of retrieval, loaded once and shared by training runs."""

    frame: pd.DataFrame
    histories: Dict[int, BehaviorSequence]
    embeddings: Dict[int, np.ndarray]
    n_items: int
    d_prime: int
    encoder: EncoderParams
    pool: RetrievalPool
    neighbors: Dict[int, SimilarUserResult]
    measure: str

    @property
    def train_ids(self) -> np.ndarray:
        return self.pool.user_ids

    @property
    def train_sequences(self) -> Dict[int, BehaviorSequence]:
        return {u: h for u, h in self.histories.items() if h.split == "train"}

    def split_frame(self, split: str) -> pd.DataFrame:
        return self.frame[self.frame["split"] == split]


def load_prepared(workspace: Workspace) -> PreparedData:
    frame, n_items = _split_frame(workspace)
    encoder, embeddings = _load_embeddings(workspace)
    require_stage(workspace.pool, "build_pool")
    retrieved = require_stage(workspace.neighbors, "retrieve")
    return PreparedData(
        frame=frame,
        histories=build_histories(frame),
        embeddings={u: e.vector for u, e in embeddings.items() if not e.empty},
        n_items=n_items,
        d_prime=encoder.d_prime,
        encoder=encoder,
        pool=RetrievalPool.load(workspace.pool / "pool.ctrt"),
        neighbors=read_neighbors(workspace.neighbors / "neighbors.tsv"),
        measure=retrieved.get("measure", "cosine"),
    )


def build_inputs(
    prepared: PreparedData,
    config: RunConfig,
    split: str,
    neighbors: Optional[Dict[int, SimilarUserResult]] = None,
) -> ModelInputs:
    plan = resolve_variant(config.model)
    mode = config.data.sample_mode if split == "train" else "last_item"
    sample_seed = config.data.seed + SAMPLE_SEED_OFFSETS[split]
    samples = make_samples(
        prepared.split_frame(split),
        mode=mode,
        negatives_per_positive=config.data.negatives_per_positive,
        seed=sample_seed,
        n_items=prepared.n_items,
    )
    if not len(samples):
        raise ConfigurationError(f"the {split} split produced no samples")
    users = sorted({sample.user_id for sample in samples.samples})
    resolved = resolve_neighbors(
        prepared.neighbors if neighbors is None else neighbors,
        plan,
        users,
        prepared.train_ids,
        seed=sample_seed,
        threshold=config.retrieval.threshold,
    )
    contexts = None
    if mode == "all_positions":
        contexts = prefix_contexts(samples.samples, prepared, config, plan, resolved)
    return collate(
        samples.samples,
        resolved,
        prepared.train_sequences,
        prepared.embeddings,
        config.model.L,
        plan.top_k,
        config.model.position_scheme,
        prepared.d_prime,
        contexts,
    )


def prefix_contexts(
    samples: Sequence[TrainingSample],
    prepared: PreparedData,
    config: RunConfig,
    plan: VariantPlan,
    resolved: Mapping[int, SimilarUserResult],
) -> List[SampleContext]:
    """
    Encode every distinct sample history and retrieve its neighbors from that
    embedding, so a user's later targets never reach the model through the stored
    per-user embedding. Random-user plans keep their per-user draws.
    """
    histories = list(dict.fromkeys(sample.history for sample in samples))
    encoded = encode_many(histories, prepared.encoder)
    contexts = {}
    for history, embedding in zip(histories, encoded):
        if plan.random_users:
            found = resolved.get(history.user_id, SimilarUserResult())
        else:
            found = retrieve_topk(
                prepared.pool,
                history.user_id,
                embedding,
                plan.top_k,
                config.retrieval.measure,
                threshold=config.retrieval.threshold,
                query_items=frozenset(history.items),
            )
        contexts[history] = SampleContext(embedding.vector, found)
    logger.info(f"Encoded {len(histories)} prefix histories for {len(samples)} samples")
    return [contexts[sample.history] for sample in samples]


def fit(
    prepared: PreparedData,
    config: RunConfig,
    verbose: bool = False,
    neighbors: Optional[Dict[int, SimilarUserResult]] = None,
) -> TrainingResult:
    return train(
        build_inputs(prepared, config, "train", neighbors),
        build_inputs(prepared, config, "val", neighbors),
        config.model,
        config.training,
        n_items=prepared.n_items,
        d_prime=prepared.d_prime,
        seed=config.seed,
        verbose=verbose,
    )


def run_train(config: RunConfig, workspace: Workspace, verbose: bool = False) -> Dict:
    prepared = load_prepared(workspace)
    result = fit(prepared, config, verbose)
    result.params.save(workspace.model / "model.ctrt")
    result.write_log(workspace.model / "training_log.csv")
    best = next(r for r in result.log if r.epoch == result.best_epoch)
    return _finish(
        workspace.model,
        config,
        {
            "stage": "train",
            "variant": config.model.variant,
            "pooling": result.params.plan.pooling,
            "K": result.params.plan.top_k,
            "L": config.model.L,
            "scheme": config.model.position_scheme,
            "epochs_run": len(result.log),
            "best_epoch": result.best_epoch,
            "best_val_auc": f"{best.val_auc:.6f}",
            "seed": config.seed,
        },
    )


def trained_config(workspace: Workspace) -> RunConfig:
    """The configuration the stored model was trained with."""
    require_stage(workspace.model, "train")
    return validate_run_config(read_resolved_config(workspace.model))


def score_split(
    prepared: PreparedData,
    config: RunConfig,
    params: ModelParams,
    split: str = "test",
    grouping: str = "none",
    neighbors: Optional[Dict[int, SimilarUserResult]] = None,
) -> EvalReport:
    inputs = build_inputs(prepared, config, split, neighbors)
    return evaluate(inputs, params, grouping, config.evaluation)


def run_evaluate(
    config: RunConfig, workspace: Workspace, grouping: Optional[str] = None, split: str = "test"
) -> Dict:
    trained = trained_config(workspace)
    grouping = grouping or config.evaluation.grouping
    evaluation = trained.model_copy(update={"evaluation": config.evaluation})
    prepared = load_prepared(workspace)
    params = ModelParams.load(workspace.model / "model.ctrt", trained.model)
    report = score_split(prepared, evaluation, params, split, grouping)
    report.write_csv(workspace.eval / f"report_{grouping}.csv")
    return _finish(
        workspace.eval,
        config,
        {
            "stage": "evaluate",
            "split": split,
            "grouping": grouping,
            "count": report.count,
            "auc": f"{report.auc:.6f}",
            "logloss": f"{report.logloss:.6f}",
        },
    )


def run_inspect(config: RunConfig, workspace: Workspace, user_id: int) -> Tuple[str, Dict]:
    """Text dump of the user's augmented sequence, plus attention weights when the model attends."""
    trained = trained_config(workspace)
    prepared = load_prepared(workspace)
    frame = prepared.frame[prepared.frame["user_id"] == user_id]
    if frame.empty:
        raise ConfigurationError(f"user {user_id} is not in the dataset")
    split = str(frame["split"].iloc[0])
    plan = resolve_variant(trained.model)
    samples = make_samples(frame, mode="last_item", seed=trained.data.seed, n_items=prepared.n_items)
    if not len(samples):
        raise ConfigurationError(f"user {user_id} has no usable history")
    positive = samples.samples[0]
    resolved = resolve_neighbors(
        prepared.neighbors,
        plan,
        [user_id],
        prepared.train_ids,
        seed=trained.data.seed + SAMPLE_SEED_OFFSETS[split],
        threshold=trained.retrieval.threshold,
    )
    aug = augment_sample(
        positive,
        resolved,
        prepared.train_sequences,
        trained.model.L,
        plan.top_k,
        trained.model.position_scheme,
    )
    text = render_augmented(aug)
    workspace.inspect.mkdir(parents=True, exist_ok=True)
    (workspace.inspect / f"augmented_{user_id}.txt").write_text(text, encoding="utf-8")

    params = ModelParams.load(workspace.model / "model.ctrt", trained.model).freeze()
    inputs = collate(
        [positive],
        resolved,
        prepared.train_sequences,
        prepared.embeddings,
        trained.model.L,
        plan.top_k,
        trained.model.position_scheme,
        prepared.d_prime,
    )
    result = predict_batch(inputs, params)
    manifest = {
        "stage": "inspect",
        "user_id": user_id,
        "split": split,
        "target_item": positive.item_id,
        "probability": f"{result.probs.data[0]:.6f}",
    }
    if result.attention_weights is not None:
        write_attention_weights(
            workspace.inspect / f"attention_{user_id}.csv", aug, result.attention_weights.data[0]
        )
    return text, _finish(workspace.inspect, config, manifest)
