from apps.pipeline.stages import run_train
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Train the CTR model with validation early stopping."
    stage = "train"
    upstream = ["split", "pretrain", "build_pool", "retrieve"]

    def run(self, config, workspace, options):
        return run_train(config, workspace, verbose=self.verbose)
