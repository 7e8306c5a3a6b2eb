from dataclasses import dataclass
from pathlib import Path

# pipeline stage -> directory holding its outputs
STAGE_DIRS = {
    "generate": "data",
    "split": "split",
    "pretrain": "encoder",
    "build_pool": "pool",
    "retrieve": "neighbors",
    "train": "model",
    "evaluate": "eval",
    "inspect": "inspect",
    "ablate": "ablation",
}


@dataclass(frozen=True)
class Workspace:
    """
    # Workspace
    One run directory, one subdirectory per stage, each with its own manifest.

    - data/interactions.csv, data/clusters.ctrt        (generate)
    - split/interactions.csv                            (split)
    - encoder/encoder.ctrt, encoder/embeddings.ctrt     (pretrain)
    - pool/pool.ctrt                                    (build_pool)
    - neighbors/neighbors.tsv                           (retrieve)
    - model/model.ctrt, model/training_log.csv          (train)
    - eval/report_<grouping>.csv                        (evaluate)
    - inspect/augmented_<user>.txt, attention_<user>.csv (inspect)
    - ablation/<sweep>.csv                              (ablate)
    """

    root: Path

    def stage(self, name: str) -> Path:
        return Path(self.root) / name

    def output_of(self, stage: str) -> Path:
        return self.stage(STAGE_DIRS[stage])

    @property
    def data(self) -> Path:
        return self.stage("data")

    @property
    def split(self) -> Path:
        return self.stage("split")

    @property
    def encoder(self) -> Path:
        return self.stage("encoder")

    @property
    def pool(self) -> Path:
        return self.stage("pool")

    @property
    def neighbors(self) -> Path:
        return self.stage("neighbors")

    @property
    def model(self) -> Path:
        return self.stage("model")

    @property
    def eval(self) -> Path:
        return self.stage("eval")

    @property
    def inspect(self) -> Path:
        return self.stage("inspect")

    @property
    def ablation(self) -> Path:
        return self.stage("ablation")
