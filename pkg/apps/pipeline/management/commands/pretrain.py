from apps.pipeline.stages import run_pretrain
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Pretrain the sequence encoder on train users and dump frozen behavior embeddings."
    stage = "pretrain"
    upstream = ["split"]

    def run(self, config, workspace, options):
        return run_pretrain(config, workspace, verbose=self.verbose)
