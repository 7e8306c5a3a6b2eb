from apps.pipeline.stages import run_inspect
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Show one user's augmented sequence and, for attention models, its weights."
    stage = "inspect"
    upstream = ["train"]

    def add_stage_arguments(self, parser):
        parser.add_argument("--user", type=int, required=True)

    def run(self, config, workspace, options):
        text, manifest = run_inspect(config, workspace, options["user"])
        self.stdout.write(text)
        return manifest
