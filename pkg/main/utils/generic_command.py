import logging
from typing import Any, Dict, List, Optional

from django.core.management.base import BaseCommand, CommandError
from pydantic import ValidationError

from apps.pipeline.config import OVERRIDE_KEYS, RunConfig, load_run_config
from apps.pipeline.workspace import Workspace
from main.utils.artifacts import require_stage
from main.utils.exceptions import PipelineError

logger = logging.getLogger(__name__)


class GenericCommand(BaseCommand):
    """
    # GenericCommand
    **Required attributes**
    - stage: pipeline stage the command runs (names its manifest and output directory)
    - help: one-line description shown by `manage.py help`

    **Optional attributes**
    - upstream: stages whose manifests must exist before running (default: none)

    **Shared flags**
    - --config PATH, --seed N, --out DIR, --threads N
    - --K, --L, --variant, --measure, --scheme

    **Flow**
    - config file + flags -> RunConfig, upstream manifests checked
    - pre_run -> run -> post_run
    - pipeline and validation errors become CommandError (nonzero exit, one-line message)
    """

    stage: Optional[str] = None
    upstream: List[str] = []

    def __init__(self, *args, **kwargs):
        if not self.stage:
            raise NotImplementedError("stage must be defined")
        super().__init__(*args, **kwargs)

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="YAML run configuration")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--out", default=None, help="output directory of the run")
        parser.add_argument("--threads", type=int, default=None)
        parser.add_argument("--K", type=int, default=None, help="number of similar users")
        parser.add_argument("--L", type=int, default=None, help="per-user sequence length")
        parser.add_argument("--variant", default=None)
        parser.add_argument("--measure", default=None)
        parser.add_argument("--scheme", default=None, help="position scheme")
        self.add_stage_arguments(parser)

    def add_stage_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            config = load_run_config(
                options.get("config"),
                {key: options.get(flag) for flag, key in OVERRIDE_KEYS.items()},
            )
            workspace = Workspace(config.output_path)
            for stage in self.upstream:
                require_stage(workspace.output_of(stage), stage)
            self.verbose = options.get("verbosity", 1) >= 2
            self.pre_run(config, workspace, options)
            result = self.run(config, workspace, options)
            self.post_run(config, workspace, result)
        except (PipelineError, ValidationError) as error:
            logger.error(f"{self.stage} failed: {error}")
            raise CommandError(f"{self.stage}: {error}") from error

    def run(self, config: RunConfig, workspace: Workspace, options: Dict[str, Any]):
        raise NotImplementedError

    # Middleware methods
    def pre_run(self, config: RunConfig, workspace: Workspace, options: Dict[str, Any]):
        logger.info(f"Running {self.stage} in {workspace.root}")

    def post_run(self, config: RunConfig, workspace: Workspace, result):
        if isinstance(result, dict):
            for key, value in result.items():
                self.stdout.write(f"{key}={value}")
        logger.info(f"Finished {self.stage}")
