from apps.pipeline.stages import run_retrieve
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Precompute similar users for every user and write the neighbor file."
    stage = "retrieve"
    upstream = ["split", "pretrain", "build_pool"]

    def run(self, config, workspace, options):
        return run_retrieve(config, workspace)
