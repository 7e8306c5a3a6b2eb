from apps.pipeline.stages import run_build_pool
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Build the retrieval pool from train users' behavior embeddings."
    stage = "build_pool"
    upstream = ["split", "pretrain"]

    def run(self, config, workspace, options):
        return run_build_pool(config, workspace)
