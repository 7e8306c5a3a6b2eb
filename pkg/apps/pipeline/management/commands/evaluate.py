from apps.ctr.config import GROUPINGS
from apps.pipeline.stages import run_evaluate
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Score the trained model: AUC and logloss, optionally per group."
    stage = "evaluate"
    upstream = ["train"]

    def add_stage_arguments(self, parser):
        parser.add_argument("--grouping", choices=GROUPINGS, default=None)
        parser.add_argument("--split", choices=["val", "test"], default="test")

    def run(self, config, workspace, options):
        return run_evaluate(config, workspace, options.get("grouping"), options["split"])
