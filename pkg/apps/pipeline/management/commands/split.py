from apps.pipeline.stages import run_split
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Partition users into train / val / test."
    stage = "split"
    upstream = ["generate"]

    def run(self, config, workspace, options):
        return run_split(config, workspace)
